#include "smi/invariants.hpp"

#include <cmath>

#include "smi/gradcheck.hpp"
#include "smi/rng.hpp"

namespace smi {

namespace {

void compare_step(TrajectoryComparison& cmp, const Matrix& a, const Matrix& b, Index step) {
    const double diff = (a - b).cwiseAbs().maxCoeff();
    cmp.max_abs_diff = std::max(cmp.max_abs_diff, diff);
    if (cmp.identical && !(a.array() == b.array()).all()) {
        cmp.identical = false;
        cmp.first_mismatch = step;
    }
    cmp.steps = step + 1;
}

OptimizerConfig sgd(double lr) { return {OptimizerKind::Sgd, lr}; }

Matrix normal_matrix(SplitMix64& gen, Index rows, Index cols, double sd) {
    Matrix out(rows, cols);
    fill_standard_normal(gen, out);
    return out * sd;
}

}  // namespace

BnnRegressionModel random_bnn(Index inputs, Index hidden, Index records, Activation activation,
                              NoiseModel noise, std::uint64_t seed) {
    auto gen = stream(seed, StreamPurpose::Data, 17);
    Matrix x = normal_matrix(gen, records, inputs, 1.0);
    Matrix y = normal_matrix(gen, records, 1, 1.0);
    return BnnRegressionModel(Dataset(std::move(x), std::move(y)), hidden, activation, noise);
}

ConjugateGaussianModel random_conjugate_model(Index dim, Index records, std::uint64_t seed) {
    auto gen = stream(seed, StreamPurpose::Data, 23);
    std::uniform_real_distribution<double> prior_sd(0.5, 2.0);
    std::uniform_real_distribution<double> noise_sd(0.3, 1.5);
    const double ps = prior_sd(gen);
    const double ns = noise_sd(gen);
    const Vector truth = standard_normal_vector(gen, dim) * ps;
    Matrix y = normal_matrix(gen, records, dim, ns);
    y.rowwise() += truth.transpose();
    return ConjugateGaussianModel(std::move(y), ps, ns);
}

TrajectoryComparison compare_smi_point_mass_with_svgd(Index steps, Index particles,
                                                      std::uint64_t seed, double repulsion_sign) {
    const ConjugateGaussianModel model = random_conjugate_model(2, 5, seed);
    const Guide guide = PointMassGuide(2);
    auto gen = stream(seed, StreamPurpose::Initialization, 0);
    const Matrix init = normal_matrix(gen, particles, 2, 2.0);

    EngineConfig svgd;
    svgd.method = Method::Svgd;
    svgd.optimizer = sgd(0.05);
    svgd.repulsion_sign = repulsion_sign;
    ParticleEnsemble a(init, seed);
    ParticleEnsemble b(init, seed);
    Optimizer opt_a = make_optimizer(svgd, a);
    Optimizer opt_b = make_optimizer(svgd, b);

    TrajectoryComparison cmp;
    for (Index t = 0; t < steps; ++t) {
        engine_step(model, guide, svgd, a, opt_a);

        const Index m = b.size();
        Matrix grads(m, b.particle_dim());
        for (Index l = 0; l < m; ++l)
            grads.row(l) = (smi_attractive_grad(model, guide, b, l, 1) / static_cast<double>(m))
                               .transpose();
        const RbfKernel kernel(median_bandwidth(b.particles));
        nsvgd_step(b, grads, kernel, svgd.alpha, opt_b, 1.0, repulsion_sign);
        compare_step(cmp, a.particles, b.particles, t);
    }
    return cmp;
}

TrajectoryComparison compare_single_smi_with_ovi(Index steps, std::uint64_t seed, bool via_nsvgd) {
    const ConjugateGaussianModel model = random_conjugate_model(2, 5, seed);
    const GaussianGuide g(2);
    auto gen = stream(seed, StreamPurpose::Initialization, 0);
    Matrix init(1, 4);
    init.leftCols(2) = normal_matrix(gen, 1, 2, 1.0);
    init.rightCols(2) = uniform_matrix(gen, 1, 2, -0.5, 0.5);

    EngineConfig smi;
    smi.method = Method::Smi;
    smi.optimizer = sgd(0.01);
    smi.n_draws = 10;
    EngineConfig ovi = smi;
    ovi.method = Method::Ovi;
    ovi.ovi_via_nsvgd = via_nsvgd;

    ParticleEnsemble a(init, seed);
    ParticleEnsemble b(init, seed);
    Optimizer opt_a = make_optimizer(smi, a);
    Optimizer opt_b = make_optimizer(ovi, b);
    TrajectoryComparison cmp;
    for (Index t = 0; t < steps; ++t) {
        engine_step(model, g, smi, a, opt_a);
        engine_step(model, g, ovi, b, opt_b);
        compare_step(cmp, a.particles, b.particles, t);
    }
    return cmp;
}

TrajectoryComparison compare_single_svgd_with_map(Index steps, std::uint64_t seed) {
    const ConjugateGaussianModel model = random_conjugate_model(3, 5, seed);
    const Guide guide = PointMassGuide(3);
    auto gen = stream(seed, StreamPurpose::Initialization, 0);
    const Matrix init = normal_matrix(gen, 1, 3, 3.0);

    EngineConfig svgd;
    svgd.method = Method::Svgd;
    svgd.optimizer = sgd(0.02);
    EngineConfig map = svgd;
    map.method = Method::Map;

    ParticleEnsemble a(init, seed);
    ParticleEnsemble b(init, seed);
    Optimizer opt_a = make_optimizer(svgd, a);
    Optimizer opt_b = make_optimizer(map, b);
    TrajectoryComparison cmp;
    for (Index t = 0; t < steps; ++t) {
        engine_step(model, guide, svgd, a, opt_a);
        engine_step(model, guide, map, b, opt_b);
        compare_step(cmp, a.particles, b.particles, t);
    }
    return cmp;
}

double model_gradient_error(const LogJointModel& model, Index points, std::uint64_t seed,
                            double theta_sd) {
    double worst = 0.0;
    for (Index i = 0; i < points; ++i) {
        auto gen = stream(seed, StreamPurpose::Initialization, 31, static_cast<std::uint64_t>(i));
        const Vector theta = standard_normal_vector(gen, model.latent_dim()) * theta_sd;
        const Vector numeric = finite_difference_gradient(
            [&](const Vector& t) { return model.log_joint(t); }, theta, 1e-5);
        worst = std::max(worst, gradient_relative_error(model.grad_log_joint(theta), numeric));
    }
    return worst;
}

double guide_gradient_error(Index dim, Index points, std::uint64_t seed) {
    const GaussianGuide g(dim);
    double worst = 0.0;
    for (Index i = 0; i < points; ++i) {
        auto gen = stream(seed, StreamPurpose::Initialization, 37, static_cast<std::uint64_t>(i));
        const Vector psi = standard_normal_vector(gen, 2 * dim);
        const Vector theta =
            g.loc(psi) + 2.0 * g.scale(psi).cwiseProduct(standard_normal_vector(gen, dim));
        const Vector numeric = finite_difference_gradient(
            [&](const Vector& p) { return g.log_density(theta, p); }, psi, 1e-5);
        worst = std::max(worst, gradient_relative_error(g.grad_psi_log_density(theta, psi), numeric));
    }
    return worst;
}

double kernel_gradient_error(Index dim, Index points, std::uint64_t seed) {
    double worst = 0.0;
    std::uniform_real_distribution<double> width(1.0, 3.0);
    for (Index i = 0; i < points; ++i) {
        auto gen = stream(seed, StreamPurpose::Initialization, 41, static_cast<std::uint64_t>(i));
        const RbfKernel k(static_cast<double>(dim) * width(gen));
        const Vector x = standard_normal_vector(gen, dim);
        const Vector y = standard_normal_vector(gen, dim);
        const Vector numeric =
            finite_difference_gradient([&](const Vector& p) { return k.eval(p, y); }, x, 1e-5);
        worst = std::max(worst, gradient_relative_error(k.grad_first(x, y), numeric));
    }
    return worst;
}

ElboBound elbo_bound_check(const ConjugateGaussianModel& model, Index particles,
                           std::uint64_t seed, Index steps, Index batches, Index draws_per_batch) {
    const Index d = model.latent_dim();
    const GaussianGuide g(d);
    auto gen = stream(seed, StreamPurpose::Initialization, 43);
    Matrix init(particles, 2 * d);
    init.leftCols(d) = normal_matrix(gen, particles, d, 1.0);
    init.rightCols(d) = uniform_matrix(gen, particles, d, -1.0, 0.0);

    EngineConfig ec;
    ec.method = particles == 1 ? Method::Ovi : Method::Smi;
    ec.optimizer = {OptimizerKind::Adagrad, 0.1};
    ec.n_draws = 10;
    ec.max_steps = steps;
    ParticleEnsemble ensemble(init, seed);
    run_inference(model, g, ec, ensemble);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (Index b = 0; b < batches; ++b) {
        ParticleEnsemble probe = ensemble;
        probe.step = steps + b;
        const double e = elbo_estimate(model, g, probe, draws_per_batch);
        sum += e;
        sum_sq += e * e;
    }
    const double n = static_cast<double>(batches);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n), model.log_evidence()};
}

}  // namespace smi
