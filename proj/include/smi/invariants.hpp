#pragma once

#include <cstdint>

#include "smi/engine.hpp"
#include "smi/model.hpp"

namespace smi {

/// Step-by-step comparison of two parameter trajectories.
struct TrajectoryComparison {
    bool identical = true;
    Index first_mismatch = -1;  // step index, -1 when identical
    double max_abs_diff = 0.0;
    Index steps = 0;
};

/// SMI with point-mass guides (attractive force divided by m) against the
/// SVGD engine path, on a conjugate Gaussian model.
TrajectoryComparison compare_smi_point_mass_with_svgd(Index steps, Index particles,
                                                      std::uint64_t seed,
                                                      double repulsion_sign = 1.0);

/// One-particle SMI against OVI. With via_nsvgd the OVI update is routed
/// through the generic particle step.
TrajectoryComparison compare_single_smi_with_ovi(Index steps, std::uint64_t seed,
                                                 bool via_nsvgd = false);

/// One-particle SVGD against MAP.
TrajectoryComparison compare_single_svgd_with_map(Index steps, std::uint64_t seed);

/// Worst relative finite-difference error of grad_log_joint over `points`
/// random theta ~ N(0, theta_sd^2 I).
double model_gradient_error(const LogJointModel& model, Index points, std::uint64_t seed,
                            double theta_sd = 1.0);

/// Same for grad_psi_log_density of a Gaussian guide in dimension d.
double guide_gradient_error(Index dim, Index points, std::uint64_t seed);

/// Same for RbfKernel::grad_first in dimension d.
double kernel_gradient_error(Index dim, Index points, std::uint64_t seed);

/// Small BNN instance used by the gradient and minibatch checks.
BnnRegressionModel random_bnn(Index inputs, Index hidden, Index records, Activation activation,
                              NoiseModel noise, std::uint64_t seed);

/// Conjugate Gaussian model with random data, prior and noise scales.
ConjugateGaussianModel random_conjugate_model(Index dim, Index records, std::uint64_t seed);

/// ELBO of a converged one-particle fit against the analytic evidence.
struct ElboBound {
    double elbo_mean;
    double standard_error;
    double log_evidence;
    bool holds() const noexcept { return elbo_mean + 4.0 * standard_error <= log_evidence; }
};

ElboBound elbo_bound_check(const ConjugateGaussianModel& model, Index particles,
                           std::uint64_t seed, Index steps = 2000, Index batches = 40,
                           Index draws_per_batch = 500);

}  // namespace smi
