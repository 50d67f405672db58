#include "smi/engine.hpp"

#include <cmath>
#include <limits>

#include "smi/rng.hpp"

namespace smi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_direction(const Matrix& phi, const Matrix& particles) {
    for (Index l = 0; l < phi.rows(); ++l)
        if (!phi.row(l).allFinite())
            throw NumericalFailure("non-finite update direction for particle " + std::to_string(l),
                                   particles.row(l).transpose(), l);
}

void check_particles(const Matrix& particles) {
    for (Index l = 0; l < particles.rows(); ++l)
        if (!particles.row(l).allFinite())
            throw NumericalFailure("particle " + std::to_string(l) + " left the finite range",
                                   particles.row(l).transpose(), l);
}

/// Model gradient at particle l, with the particle index attached to any
/// numerical failure.
Vector particle_grad(const LogJointModel& model, const Matrix& particles, Index l,
                     const Batch& batch) {
    try {
        return model.grad_log_joint(particles.row(l).transpose(), batch);
    } catch (const NumericalFailure& e) {
        throw NumericalFailure(e.what(), e.point(), l);
    }
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::Smi: return "smi";
        case Method::Svgd: return "svgd";
        case Method::Asvgd: return "asvgd";
        case Method::Ovi: return "ovi";
        case Method::Map: return "map";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "smi") return Method::Smi;
    if (name == "svgd") return Method::Svgd;
    if (name == "asvgd") return Method::Asvgd;
    if (name == "ovi") return Method::Ovi;
    if (name == "map") return Method::Map;
    throw InvalidConfig("unknown method '" + name + "'");
}

std::string to_string(ForceEstimator estimator) {
    return estimator == ForceEstimator::ScoreFunction ? "score" : "pathwise";
}

ForceEstimator force_estimator_from_string(const std::string& name) {
    if (name == "score") return ForceEstimator::ScoreFunction;
    if (name == "pathwise") return ForceEstimator::Pathwise;
    throw InvalidConfig("unknown force estimator '" + name + "'");
}

// ---------------------------------------------------------------------------
// Annealing

AnnealSchedule AnnealSchedule::for_steps(Index max_steps, Index n_cycles, double power) {
    if (n_cycles < 1) throw InvalidConfig("anneal n_cycles must be >= 1");
    return {std::max<Index>(1, max_steps / n_cycles), n_cycles, power};
}

double asvgd_anneal(Index step, const AnnealSchedule& schedule) {
    if (step < 0) throw InvalidInput("anneal step must be nonnegative");
    if (schedule.cycle_length < 1) throw InvalidConfig("anneal cycle_length must be >= 1");
    if (step + 1 >= schedule.cycle_length * schedule.n_cycles) return 1.0;
    const double phase = static_cast<double>(step % schedule.cycle_length) /
                         static_cast<double>(schedule.cycle_length);
    return std::pow(phase, schedule.power);
}

void EngineConfig::validate() const {
    if (!(alpha >= 0.0)) throw InvalidConfig("engine.alpha must be nonnegative");
    if (n_draws < 1) throw InvalidConfig("engine.n_draws must be >= 1");
    if (max_steps < 0) throw InvalidConfig("engine.max_steps must be nonnegative");
    if (batch_size && *batch_size < 1) throw InvalidConfig("engine.batch_size must be >= 1");
    if (slow_window < 1 || fast_window < 1 || fast_window > slow_window)
        throw InvalidConfig("convergence windows must satisfy 1 <= fast <= slow");
    optimizer.validate();
}

std::vector<double> RunRecord::force_norms() const {
    std::vector<double> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.force_norm);
    return out;
}

// ---------------------------------------------------------------------------
// Attractive force

AttractiveForce::NoiseSource AttractiveForce::stream_noise(std::uint64_t seed, Index step,
                                                           Index n_draws, Index dim) {
    return [=](Index component) {
        Matrix eps(n_draws, dim);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index s = 0; s < n_draws; ++s) {
            auto gen = stream(seed, StreamPurpose::GuideDraw, static_cast<std::uint64_t>(step),
                              static_cast<std::uint64_t>(component), static_cast<std::uint64_t>(s));
            for (Index j = 0; j < dim; ++j) eps(s, j) = normal(gen);
        }
        return eps;
    };
}

AttractiveForce::AttractiveForce(const LogJointModel& model, const GaussianGuide& guide,
                                 const Matrix& particles, Index n_draws, const NoiseSource& noise,
                                 const Batch& batch, ForceEstimator estimator)
    : guide_(guide),
      particles_(particles),
      m_(particles.rows()),
      n_draws_(n_draws),
      estimator_(estimator) {
    const Index d = guide.latent_dim();
    if (m_ < 1) throw InvalidInput("attractive force needs at least one particle");
    if (particles.cols() != guide.particle_dim())
        throw InvalidInput("particles do not match the guide layout");
    if (n_draws_ < 1) throw InvalidInput("n_draws must be >= 1");
    if (model.latent_dim() != d) throw InvalidInput("guide and model latent dims differ");

    Matrix locs = particles.leftCols(d);
    Matrix scales(m_, d);
    for (Index j = 0; j < m_; ++j) scales.row(j) = guide.scale(particles.row(j).transpose()).transpose();
    const Vector log_scale_sum = scales.array().log().rowwise().sum();

    eps_.resize(static_cast<std::size_t>(m_));
    theta_.resize(eps_.size());
    log_p_.resize(eps_.size());
    grad_p_.resize(eps_.size());
    log_q_.resize(eps_.size());
    lse_q_.resize(eps_.size());

    for (Index i = 0; i < m_; ++i) {
        const auto k = static_cast<std::size_t>(i);
        eps_[k] = noise(i);
        if (eps_[k].rows() != n_draws_ || eps_[k].cols() != d)
            throw InvalidInput("noise source returned the wrong shape");
        theta_[k] = (eps_[k].array().rowwise() * scales.row(i).array()).rowwise() +
                    locs.row(i).array();

        try {
            log_p_[k] = model.log_joint_rows(
                theta_[k], batch, estimator_ == ForceEstimator::Pathwise ? &grad_p_[k] : nullptr);
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(e.what(), e.point(), i);
        }

        log_q_[k].resize(n_draws_, m_);
        for (Index j = 0; j < m_; ++j) {
            const Eigen::ArrayXXd z =
                (theta_[k].array().rowwise() - locs.row(j).array()).rowwise() / scales.row(j).array();
            log_q_[k].col(j) = (-0.5 * z.square().rowwise().sum() - log_scale_sum(j) -
                                static_cast<double>(d) * GaussianGuide::kHalfLog2Pi)
                                   .matrix();
        }
        lse_q_[k].resize(n_draws_);
        for (Index s = 0; s < n_draws_; ++s) lse_q_[k](s) = log_sum_exp(log_q_[k].row(s));
    }
}

double AttractiveForce::responsibility(Index i, Index s, Index ell) const {
    const auto row = log_q_[static_cast<std::size_t>(i)].row(s);
    const double top = row.maxCoeff();
    return std::exp(row(ell) - top) / (row.array() - top).exp().sum();
}

Vector AttractiveForce::gradient(Index ell) const {
    if (ell < 0 || ell >= m_) throw InvalidInput("particle index out of range");
    const Index d = guide_.latent_dim();
    const auto kl = static_cast<std::size_t>(ell);
    const Vector psi = particles_.row(ell).transpose();
    const Eigen::ArrayXd loc = psi.head(d).array();
    const Eigen::ArrayXd raw = psi.tail(d).array();
    const Eigen::ArrayXd scale = raw.unaryExpr([](double r) { return softplus(r); });
    const Eigen::ArrayXd slope = raw.unaryExpr([](double r) { return sigmoid(r); });
    const double inv_s = 1.0 / static_cast<double>(n_draws_);

    // Score of component ell at the draws of component i, reduced against
    // per-draw weights: returns sum_s w(s) * grad_psi log q(theta_{i,s} | psi_ell).
    auto weighted_score = [&](Index i, const Vector& w) {
        const Eigen::ArrayXXd z =
            (theta_[static_cast<std::size_t>(i)].array().rowwise() - loc.transpose()).rowwise() /
            scale.transpose();
        Vector g(2 * d);
        g.head(d) = (z.matrix().transpose() * w).array() / scale;
        g.tail(d) = ((z.square() - 1.0).matrix().transpose() * w).array() * slope / scale;
        return g;
    };

    Vector first(2 * d);
    if (estimator_ == ForceEstimator::ScoreFunction) {
        const Vector w = (log_p_[kl] - lse_q_[kl]) * inv_s;
        first = weighted_score(ell, w);
    } else {
        // grad_theta [log p - log q_mix] at component ell's draws, pulled back
        // through theta = loc + scale * eps.
        const Matrix& th = theta_[kl];
        Matrix resp(n_draws_, m_);
        for (Index s = 0; s < n_draws_; ++s) {
            const auto row = log_q_[kl].row(s);
            const double top = row.maxCoeff();
            const Eigen::ArrayXd e = (row.array() - top).exp();
            resp.row(s) = (e / e.sum()).matrix().transpose();
        }
        Matrix precision(m_, d);
        for (Index j = 0; j < m_; ++j) {
            const Eigen::ArrayXd s = guide_.scale(particles_.row(j).transpose()).array();
            precision.row(j) = (1.0 / s.square()).matrix().transpose();
        }
        const Matrix locs = particles_.leftCols(d);
        const Matrix grad_log_mix =
            -(th.cwiseProduct(resp * precision) - resp * locs.cwiseProduct(precision));
        const Matrix g_theta = grad_p_[kl] - grad_log_mix;
        first.head(d) = g_theta.colwise().sum().transpose() * inv_s;
        first.tail(d) = (g_theta.cwiseProduct(eps_[kl]).colwise().sum().transpose().array() * slope)
                            .matrix() *
                        inv_s;
    }

    Vector second = Vector::Zero(2 * d);
    for (Index i = 0; i < m_; ++i) {
        Vector w(n_draws_);
        for (Index s = 0; s < n_draws_; ++s) w(s) = responsibility(i, s, ell) * inv_s;
        second += weighted_score(i, w);
    }

    Vector grad = first - second;
    if (!grad.allFinite())
        throw NumericalFailure("non-finite attractive force for particle " + std::to_string(ell),
                               psi, ell);
    return grad;
}

Matrix AttractiveForce::gradients() const {
    Matrix out(m_, 2 * guide_.latent_dim());
    for (Index l = 0; l < m_; ++l) out.row(l) = gradient(l).transpose();
    return out;
}

double AttractiveForce::elbo() const {
    const double log_m = std::log(static_cast<double>(m_));
    double total = 0.0;
    for (Index l = 0; l < m_; ++l) {
        const auto k = static_cast<std::size_t>(l);
        total += (log_p_[k].array() - (lse_q_[k].array() - log_m)).mean();
    }
    return total / static_cast<double>(m_);
}

// ---------------------------------------------------------------------------
// Per-method gradients and steps

Vector smi_attractive_grad(const LogJointModel& model, const Guide& guide,
                           const ParticleEnsemble& ensemble, Index ell, Index n_draws,
                           const Batch& batch, ForceEstimator estimator) {
    if (ell < 0 || ell >= ensemble.size()) throw InvalidInput("particle index out of range");
    if (std::holds_alternative<PointMassGuide>(guide))
        return particle_grad(model, ensemble.particles, ell, batch);
    const auto& g = std::get<GaussianGuide>(guide);
    const AttractiveForce force(
        model, g, ensemble.particles, n_draws,
        AttractiveForce::stream_noise(ensemble.seed, ensemble.step, n_draws, g.latent_dim()), batch,
        estimator);
    return force.gradient(ell);
}

Vector svgd_grad(const LogJointModel& model, const ParticleEnsemble& ensemble, Index ell,
                 const Batch& batch) {
    if (ell < 0 || ell >= ensemble.size()) throw InvalidInput("particle index out of range");
    return particle_grad(model, ensemble.particles, ell, batch) /
           static_cast<double>(ensemble.size());
}

Matrix nsvgd_direction(const Matrix& particles, const Matrix& per_particle_grads,
                       const RbfKernel& kernel, double alpha, double attractive_factor,
                       double repulsion_sign) {
    const Index m = particles.rows();
    if (per_particle_grads.rows() != m || per_particle_grads.cols() != particles.cols())
        throw InvalidInput("per-particle gradients do not match the ensemble");
    const Matrix k = kernel_matrix(kernel, particles);
    const double repulsion_scale = repulsion_sign * alpha / static_cast<double>(m);

    // Particles as columns so the inner loop runs over contiguous memory.
    const Matrix psi = particles.transpose();
    const Matrix grads = per_particle_grads.transpose();
    Matrix phi(particles.cols(), m);
    for (Index l = 0; l < m; ++l) {
        auto out = phi.col(l);
        // Self term: k(psi_l, psi_l) = 1 and grad_1 k(psi_l, psi_l) = 0.
        out = attractive_factor * grads.col(l);
        for (Index i = 0; i < m; ++i) {
            if (i == l) continue;
            out += (k(i, l) * attractive_factor) * grads.col(i);
            // grad_1 k(psi_i, psi_l) = -(2/h) (psi_i - psi_l) k(psi_i, psi_l)
            out += (repulsion_scale * -2.0 / kernel.bandwidth() * k(i, l)) *
                   (psi.col(i) - psi.col(l));
        }
    }
    return phi.transpose();
}

double nsvgd_step(ParticleEnsemble& ensemble, const Matrix& per_particle_grads,
                  const RbfKernel& kernel, double alpha, Optimizer& optimizer,
                  double attractive_factor, double repulsion_sign) {
    const Matrix phi = nsvgd_direction(ensemble.particles, per_particle_grads, kernel, alpha,
                                       attractive_factor, repulsion_sign);
    check_direction(phi, ensemble.particles);
    optimizer.ascend(ensemble.particles, phi);
    check_particles(ensemble.particles);
    ++ensemble.step;
    return phi.norm();
}

double ovi_step(const LogJointModel& model, const GaussianGuide& guide, ParticleEnsemble& ensemble,
                Index n_draws, Optimizer& optimizer, const Batch& batch, ForceEstimator estimator,
                bool via_nsvgd) {
    if (ensemble.size() != 1) throw InvalidInput("OVI operates on a single particle");
    const AttractiveForce force(
        model, guide, ensemble.particles, n_draws,
        AttractiveForce::stream_noise(ensemble.seed, ensemble.step, n_draws, guide.latent_dim()),
        batch, estimator);
    const Matrix grad = force.gradient(0).transpose();
    if (via_nsvgd) {
        const RbfKernel kernel(median_bandwidth(ensemble.particles));
        return nsvgd_step(ensemble, grad / 1.0, kernel, 1.0, optimizer);
    }
    check_direction(grad, ensemble.particles);
    optimizer.ascend(ensemble.particles, grad);
    check_particles(ensemble.particles);
    ++ensemble.step;
    return grad.norm();
}

double map_step(const LogJointModel& model, ParticleEnsemble& ensemble, Optimizer& optimizer,
                const Batch& batch) {
    Matrix dir(ensemble.size(), ensemble.particle_dim());
    for (Index l = 0; l < ensemble.size(); ++l)
        dir.row(l) = particle_grad(model, ensemble.particles, l, batch).transpose();
    check_direction(dir, ensemble.particles);
    optimizer.ascend(ensemble.particles, dir);
    check_particles(ensemble.particles);
    ++ensemble.step;
    return dir.norm();
}

double elbo_estimate(const LogJointModel& model, const GaussianGuide& guide,
                     const ParticleEnsemble& ensemble, Index n_draws, const Batch& batch) {
    const AttractiveForce force(
        model, guide, ensemble.particles, n_draws,
        AttractiveForce::stream_noise(ensemble.seed, ensemble.step, n_draws, guide.latent_dim()),
        batch, ForceEstimator::ScoreFunction);
    return force.elbo();
}

bool check_convergence(const std::vector<double>& force_norms, Index slow_window,
                       Index fast_window) {
    const auto n = static_cast<Index>(force_norms.size());
    if (n < slow_window || fast_window > slow_window) return false;
    double slow = 0.0;
    double fast = 0.0;
    for (Index i = n - slow_window; i < n; ++i) slow += force_norms[static_cast<std::size_t>(i)];
    for (Index i = n - fast_window; i < n; ++i) fast += force_norms[static_cast<std::size_t>(i)];
    return fast / static_cast<double>(fast_window) > slow / static_cast<double>(slow_window);
}

// ---------------------------------------------------------------------------
// Driver

Batch step_batch(const LogJointModel& model, const EngineConfig& config,
                 const ParticleEnsemble& ensemble) {
    if (!config.batch_size || model.data_size() == 0 || *config.batch_size >= model.data_size())
        return Batch::full();
    auto gen = stream(ensemble.seed, StreamPurpose::Minibatch,
                      static_cast<std::uint64_t>(ensemble.step));
    return Batch::of(sample_batch_indices(model.data_size(), *config.batch_size, gen));
}

Optimizer make_optimizer(const EngineConfig& config, const ParticleEnsemble& ensemble) {
    return Optimizer(config.optimizer, ensemble.size(), ensemble.particle_dim());
}

StepRecord engine_step(const LogJointModel& model, const Guide& guide, const EngineConfig& config,
                       ParticleEnsemble& ensemble, Optimizer& optimizer) {
    if (ensemble.particle_dim() != particle_dim(guide))
        throw InvalidInput("ensemble width does not match the guide");
    const Batch batch = step_batch(model, config, ensemble);
    const Index m = ensemble.size();
    const Index step = ensemble.step;
    StepRecord rec{step, kNaN, kNaN, kNaN};

    const bool record_elbo = config.elbo_every > 0 && step % config.elbo_every == 0 &&
                             std::holds_alternative<GaussianGuide>(guide);
    const Index elbo_draws = config.elbo_draws > 0 ? config.elbo_draws : config.n_draws;
    if (record_elbo && (config.method != Method::Smi || elbo_draws != config.n_draws))
        rec.elbo = elbo_estimate(model, std::get<GaussianGuide>(guide), ensemble, elbo_draws, batch);

    switch (config.method) {
        case Method::Map:
            if (!std::holds_alternative<PointMassGuide>(guide))
                throw InvalidConfig("MAP runs on point-mass particles");
            rec.force_norm = map_step(model, ensemble, optimizer, batch);
            break;
        case Method::Ovi:
            if (!std::holds_alternative<GaussianGuide>(guide))
                throw InvalidConfig("OVI needs a Gaussian guide");
            rec.force_norm = ovi_step(model, std::get<GaussianGuide>(guide), ensemble,
                                      config.n_draws, optimizer, batch, config.estimator,
                                      config.ovi_via_nsvgd);
            break;
        case Method::Svgd:
        case Method::Asvgd:
        case Method::Smi: {
            Matrix grads(m, ensemble.particle_dim());
            if (config.method == Method::Smi && std::holds_alternative<GaussianGuide>(guide)) {
                const auto& g = std::get<GaussianGuide>(guide);
                const AttractiveForce force(
                    model, g, ensemble.particles, config.n_draws,
                    AttractiveForce::stream_noise(ensemble.seed, step, config.n_draws,
                                                  g.latent_dim()),
                    batch, config.estimator);
                grads = force.gradients() / static_cast<double>(m);
                if (record_elbo && std::isnan(rec.elbo)) rec.elbo = force.elbo();
            } else {
                if (!std::holds_alternative<PointMassGuide>(guide))
                    throw InvalidConfig("SVGD runs on point-mass particles");
                for (Index l = 0; l < m; ++l)
                    grads.row(l) = svgd_grad(model, ensemble, l, batch).transpose();
            }
            double gamma = 1.0;
            if (config.method == Method::Asvgd) {
                gamma = asvgd_anneal(step, config.anneal ? *config.anneal
                                                         : AnnealSchedule::for_steps(config.max_steps));
                rec.anneal = gamma;
            }
            const RbfKernel kernel(median_bandwidth(ensemble.particles));
            rec.force_norm = nsvgd_step(ensemble, grads, kernel, config.alpha, optimizer, gamma,
                                        config.repulsion_sign);
            break;
        }
    }
    return rec;
}

RunRecord run_inference(const LogJointModel& model, const Guide& guide, const EngineConfig& config,
                        ParticleEnsemble& ensemble, Optimizer& optimizer) {
    config.validate();
    RunRecord record;
    std::vector<double> norms;
    while (ensemble.step < config.max_steps) {
        const StepRecord rec = engine_step(model, guide, config, ensemble, optimizer);
        record.steps.push_back(rec);
        norms.push_back(rec.force_norm);
        if (config.stop_on_convergence &&
            check_convergence(norms, config.slow_window, config.fast_window)) {
            record.converged = true;
            break;
        }
    }
    record.final_particles = ensemble.particles;
    return record;
}

RunRecord run_inference(const LogJointModel& model, const Guide& guide, const EngineConfig& config,
                        ParticleEnsemble& ensemble) {
    Optimizer optimizer = make_optimizer(config, ensemble);
    return run_inference(model, guide, config, ensemble, optimizer);
}

}  // namespace smi
