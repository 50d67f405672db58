#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smi/guide.hpp"
#include "smi/kernel.hpp"
#include "smi/model.hpp"
#include "smi/optimizer.hpp"

namespace smi {

enum class Method { Smi, Svgd, Asvgd, Ovi, Map };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

/// How the attractive force m * grad_{psi_l} L(rho_m) is estimated.
/// ScoreFunction is the log-derivative form; Pathwise differentiates the
/// first term through reparameterized draws and shares the second term.
enum class ForceEstimator { ScoreFunction, Pathwise };

std::string to_string(ForceEstimator estimator);
ForceEstimator force_estimator_from_string(const std::string& name);

/// m particles (rows) plus the step counter and seed that key every random
/// stream used by a step.
struct ParticleEnsemble {
    Matrix particles;
    Index step = 0;
    std::uint64_t seed = 0;

    ParticleEnsemble() = default;
    ParticleEnsemble(Matrix p, std::uint64_t s) : particles(std::move(p)), seed(s) {
        if (particles.rows() < 1) throw InvalidInput("ensemble needs at least one particle");
    }

    Index size() const noexcept { return particles.rows(); }
    Index particle_dim() const noexcept { return particles.cols(); }
};

/// Cyclical annealing gamma(t) = (mod(t, T) / T)^p over n_cycles cycles of
/// length T; 1 from the last step of the final cycle onwards.
struct AnnealSchedule {
    Index cycle_length = 1;
    Index n_cycles = 4;
    double power = 2.0;

    static AnnealSchedule for_steps(Index max_steps, Index n_cycles = 4, double power = 2.0);
};

double asvgd_anneal(Index step, const AnnealSchedule& schedule);

struct EngineConfig {
    Method method = Method::Smi;
    double alpha = 1.0;  // 1 ties the objective to an ELBO
    OptimizerConfig optimizer;
    Index n_draws = 1;  // S
    Index max_steps = 1000;
    std::optional<AnnealSchedule> anneal;  // ASVGD; defaults to for_steps(max_steps)
    std::optional<Index> batch_size;       // unset means full data
    ForceEstimator estimator = ForceEstimator::ScoreFunction;
    bool ovi_via_nsvgd = false;
    bool stop_on_convergence = false;
    Index slow_window = 350;
    Index fast_window = 35;
    Index elbo_every = 0;  // record an ELBO estimate every k steps; 0 disables
    Index elbo_draws = 0;  // draws for recorded ELBO; 0 means n_draws

    /// Fault hook for the sanity suite: -1 flips the repulsive force.
    double repulsion_sign = 1.0;

    void validate() const;
};

struct StepRecord {
    Index step;
    double force_norm;
    double elbo;    // NaN when not computed this step
    double anneal;  // NaN outside ASVGD
};

struct RunRecord {
    std::vector<StepRecord> steps;
    Matrix final_particles;
    bool converged = false;

    std::vector<double> force_norms() const;
};

/// Monte Carlo workspace for the SMI attractive force at one step.
///
/// Draws theta_{i,s} = loc_i + scale_i * eps_{i,s} for every component i
/// and draw s, with eps keyed by (seed, step, i, s). The same draws serve
/// every particle's force and the ELBO estimate, so a whole-ensemble pass
/// costs m * S log-joint evaluations.
class AttractiveForce {
public:
    /// Noise for component i, as an S x d matrix of standard normals.
    using NoiseSource = std::function<Matrix(Index component)>;

    AttractiveForce(const LogJointModel& model, const GaussianGuide& guide, const Matrix& particles,
                    Index n_draws, const NoiseSource& noise, const Batch& batch,
                    ForceEstimator estimator);

    static NoiseSource stream_noise(std::uint64_t seed, Index step, Index n_draws, Index dim);

    /// Estimate of m * grad_{psi_l} L(rho_m).
    Vector gradient(Index ell) const;
    /// All particles' estimates, one row each.
    Matrix gradients() const;
    /// Estimate of the mixture ELBO L(rho_m).
    double elbo() const;

    /// q(theta_{i,s} | psi_l) / sum_j q(theta_{i,s} | psi_j), in (0, 1].
    double responsibility(Index i, Index s, Index ell) const;

private:
    const GaussianGuide& guide_;
    const Matrix& particles_;
    Index m_;
    Index n_draws_;
    ForceEstimator estimator_;
    std::vector<Matrix> eps_;      // per component: S x d
    std::vector<Matrix> theta_;    // per component: S x d
    std::vector<Vector> log_p_;    // per component: S
    std::vector<Matrix> grad_p_;   // per component: S x d (pathwise only)
    std::vector<Matrix> log_q_;    // per component: S x m, log q(theta_{i,s} | psi_j)
    std::vector<Vector> lse_q_;    // per component: S, log sum_j q(theta_{i,s} | psi_j)
};

/// Estimate of m * grad_{psi_l} L(rho_m) for the ensemble's current step.
/// With a point-mass guide this is grad log p(psi_l, D).
Vector smi_attractive_grad(const LogJointModel& model, const Guide& guide,
                           const ParticleEnsemble& ensemble, Index ell, Index n_draws,
                           const Batch& batch = Batch::full(),
                           ForceEstimator estimator = ForceEstimator::ScoreFunction);

/// SVGD per-particle gradient (1/m) grad log p(theta_l, D). Under the
/// Theorem-1 update the m-fold sum restores the classic mean over particles,
/// and a single particle takes an exact MAP gradient step.
Vector svgd_grad(const LogJointModel& model, const ParticleEnsemble& ensemble, Index ell,
                 const Batch& batch = Batch::full());

/// Update directions phi_l = sum_i k(psi_i, psi_l) gamma g_i
///                           + (alpha / m) sum_i grad_1 k(psi_i, psi_l)
/// for every particle, all read from the same pre-step ensemble.
Matrix nsvgd_direction(const Matrix& particles, const Matrix& per_particle_grads,
                       const RbfKernel& kernel, double alpha, double attractive_factor = 1.0,
                       double repulsion_sign = 1.0);

/// One synchronous NSVGD step. Returns the Frobenius norm of the direction.
double nsvgd_step(ParticleEnsemble& ensemble, const Matrix& per_particle_grads,
                  const RbfKernel& kernel, double alpha, Optimizer& optimizer,
                  double attractive_factor = 1.0, double repulsion_sign = 1.0);

/// Single-particle ELBO ascent. With via_nsvgd the update runs through
/// nsvgd_step with m = 1, which must agree bit for bit.
double ovi_step(const LogJointModel& model, const GaussianGuide& guide, ParticleEnsemble& ensemble,
                Index n_draws, Optimizer& optimizer, const Batch& batch = Batch::full(),
                ForceEstimator estimator = ForceEstimator::ScoreFunction, bool via_nsvgd = false);

/// Gradient ascent on log p(theta, D), each row independently.
double map_step(const LogJointModel& model, ParticleEnsemble& ensemble, Optimizer& optimizer,
                const Batch& batch = Batch::full());

/// Monte Carlo estimate of the mixture ELBO with draws keyed by the
/// ensemble's (seed, step).
double elbo_estimate(const LogJointModel& model, const GaussianGuide& guide,
                     const ParticleEnsemble& ensemble, Index n_draws,
                     const Batch& batch = Batch::full());

/// Stop when the mean force norm of the last fast_window steps exceeds the
/// mean over the last slow_window steps.
bool check_convergence(const std::vector<double>& force_norms, Index slow_window = 350,
                       Index fast_window = 35);

/// Batch for the ensemble's current step (full data unless batch_size set).
Batch step_batch(const LogJointModel& model, const EngineConfig& config,
                 const ParticleEnsemble& ensemble);

/// One step of the configured method. Returns the step record.
StepRecord engine_step(const LogJointModel& model, const Guide& guide, const EngineConfig& config,
                       ParticleEnsemble& ensemble, Optimizer& optimizer);

/// Runs up to config.max_steps - ensemble.step further steps.
RunRecord run_inference(const LogJointModel& model, const Guide& guide, const EngineConfig& config,
                        ParticleEnsemble& ensemble, Optimizer& optimizer);

RunRecord run_inference(const LogJointModel& model, const Guide& guide, const EngineConfig& config,
                        ParticleEnsemble& ensemble);

/// Optimizer shaped for the ensemble.
Optimizer make_optimizer(const EngineConfig& config, const ParticleEnsemble& ensemble);

}  // namespace smi
