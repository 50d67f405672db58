#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smi/engine.hpp"
#include "smi/guide.hpp"
#include "smi/model.hpp"

namespace smi {

/// Per-coordinate unbiased (S - 1) variance of the rows of `samples`.
Vector dimension_marginal_variance(const Matrix& samples);

/// Unbiased sample covariance of the rows of `samples`.
Matrix sample_covariance(const Matrix& samples);

/// |cov - I|_F for a covariance matrix.
double frobenius_to_identity_cov(const Matrix& covariance);
/// |Cov_hat(samples) - I|_F with the unbiased sample covariance.
double frobenius_to_identity(const Matrix& samples);

struct Interval1d {
    double low;
    double high;
    double width() const noexcept { return high - low; }
};

/// Narrowest interval holding ceil(mass * S) of the samples. Ties go to the
/// window starting at the smallest sorted sample.
Interval1d hdi(std::vector<double> samples, double mass = 0.9);

/// Log point-wise predictive density. `degenerate_rows` lists rows whose
/// densities were all zero; their contribution (and `value`) is -inf.
struct LppdResult {
    double value;
    std::vector<Index> degenerate_rows;
    bool finite() const noexcept { return degenerate_rows.empty(); }
};

/// From an n x S matrix of log densities log p(y_i | x_i, theta_s).
LppdResult lppd_from_log(const Matrix& log_densities);
/// From an n x S matrix of densities (>= 0).
LppdResult lppd(const Matrix& densities);

/// Root mean squared error of point predictions.
double rmse(const Vector& predictions, const Vector& targets);
/// Per-point mean negative log predictive density, -LPPD / n.
double nll(const Matrix& log_densities);

/// Posterior-predictive draws over a set of inputs. Row s was produced by
/// particle `particle[s]` with one guide draw theta_s.
struct PredictiveSample {
    Matrix means;                 // S x n network outputs f(x; theta_s)
    Vector noise_sd;              // S, observation noise under theta_s
    std::vector<Index> particle;  // S provenance

    Index draws() const noexcept { return means.rows(); }
    /// S x n draws of y: means plus observation noise.
    Matrix observations(std::uint64_t seed) const;
    /// n x S matrix of log N(y_i | f(x_i; theta_s), noise_sd_s^2).
    Matrix log_densities(const Matrix& targets) const;
};

/// Picks a particle uniformly, then theta from its guide, S times.
PredictiveSample predictive_sample(const BnnRegressionModel& model, const Guide& guide,
                                   const Matrix& particles, const Matrix& inputs, Index n_draws,
                                   std::uint64_t seed);

/// Smallest particle count in 1, 2, 4, ... (<= max_particles) whose SVGD
/// LPPD exceeds `smi_lppd`; at_limit when none does.
struct RecoveryPoint {
    std::optional<Index> particles;
    Index tested_up_to = 0;
    bool at_limit() const noexcept { return !particles.has_value(); }
    std::string to_string() const;
};

RecoveryPoint recovery_point(double smi_lppd, const std::function<double(Index)>& svgd_runner,
                             Index max_particles);

}  // namespace smi
