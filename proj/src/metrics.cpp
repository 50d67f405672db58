#include "smi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "smi/rng.hpp"

namespace smi {

Vector dimension_marginal_variance(const Matrix& samples) {
    if (samples.rows() < 2) throw InvalidInput("marginal variance needs at least two samples");
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    return ((samples.rowwise() - mean).array().square().colwise().sum() /
            static_cast<double>(samples.rows() - 1))
        .transpose();
}

Matrix sample_covariance(const Matrix& samples) {
    if (samples.rows() < 2) throw InvalidInput("covariance needs at least two samples");
    const Matrix centered = samples.rowwise() - samples.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
}

double frobenius_to_identity_cov(const Matrix& covariance) {
    if (covariance.rows() != covariance.cols()) throw InvalidInput("covariance must be square");
    return (covariance - Matrix::Identity(covariance.rows(), covariance.cols())).norm();
}

double frobenius_to_identity(const Matrix& samples) {
    return frobenius_to_identity_cov(sample_covariance(samples));
}

Interval1d hdi(std::vector<double> samples, double mass) {
    if (samples.empty()) throw InvalidInput("hdi needs at least one sample");
    if (!(mass > 0.0 && mass <= 1.0)) throw InvalidInput("hdi mass must lie in (0, 1]");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    // Guard the ceiling against representation error in mass * n.
    auto window = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
    window = std::clamp<std::size_t>(window, 1, n);

    std::size_t best = 0;
    double best_width = std::numeric_limits<double>::infinity();
    for (std::size_t start = 0; start + window <= n; ++start) {
        const double w = samples[start + window - 1] - samples[start];
        if (w < best_width) {
            best_width = w;
            best = start;
        }
    }
    return {samples[best], samples[best + window - 1]};
}

LppdResult lppd_from_log(const Matrix& log_densities) {
    if (log_densities.cols() < 1) throw InvalidInput("lppd needs at least one draw per row");
    LppdResult out{0.0, {}};
    const double log_s = std::log(static_cast<double>(log_densities.cols()));
    for (Index i = 0; i < log_densities.rows(); ++i) {
        const double lse = log_sum_exp(log_densities.row(i));
        if (!std::isfinite(lse)) {
            out.degenerate_rows.push_back(i);
            continue;
        }
        out.value += lse - log_s;
    }
    if (!out.degenerate_rows.empty()) out.value = -std::numeric_limits<double>::infinity();
    return out;
}

LppdResult lppd(const Matrix& densities) {
    if ((densities.array() < 0.0).any()) throw InvalidInput("densities must be nonnegative");
    return lppd_from_log(densities.array().log().matrix());
}

double rmse(const Vector& predictions, const Vector& targets) {
    if (predictions.size() != targets.size() || predictions.size() == 0)
        throw InvalidInput("rmse needs equally sized, non-empty inputs");
    return std::sqrt((predictions - targets).squaredNorm() / static_cast<double>(targets.size()));
}

double nll(const Matrix& log_densities) {
    if (log_densities.rows() < 1) throw InvalidInput("nll needs at least one point");
    return -lppd_from_log(log_densities).value / static_cast<double>(log_densities.rows());
}

Matrix PredictiveSample::observations(std::uint64_t seed) const {
    Matrix y = means;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index s = 0; s < y.rows(); ++s) {
        auto gen = stream(seed, StreamPurpose::Predictive, 1, static_cast<std::uint64_t>(s));
        for (Index i = 0; i < y.cols(); ++i) y(s, i) += noise_sd(s) * normal(gen);
    }
    return y;
}

Matrix PredictiveSample::log_densities(const Matrix& targets) const {
    if (targets.cols() != 1 || targets.rows() != means.cols())
        throw InvalidInput("targets must be an n x 1 column matching the predictive inputs");
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    Matrix out(means.cols(), means.rows());
    for (Index s = 0; s < means.rows(); ++s) {
        const double sd = noise_sd(s);
        const Eigen::ArrayXd z = (targets.col(0) - means.row(s).transpose()).array() / sd;
        out.col(s) = (-0.5 * z.square() - std::log(sd) - kHalfLog2Pi).matrix();
    }
    return out;
}

PredictiveSample predictive_sample(const BnnRegressionModel& model, const Guide& guide,
                                   const Matrix& particles, const Matrix& inputs, Index n_draws,
                                   std::uint64_t seed) {
    if (n_draws < 1) throw InvalidInput("predictive needs at least one draw");
    if (model.data().target_dim() != 1) throw InvalidInput("predictive supports scalar targets");
    if (particles.cols() != particle_dim(guide)) throw InvalidInput("particles do not match guide");
    const Index m = particles.rows();
    PredictiveSample out{Matrix(n_draws, inputs.rows()), Vector(n_draws),
                         std::vector<Index>(static_cast<std::size_t>(n_draws))};
    std::uniform_int_distribution<Index> pick(0, m - 1);
    for (Index s = 0; s < n_draws; ++s) {
        auto gen = stream(seed, StreamPurpose::Predictive, 0, static_cast<std::uint64_t>(s));
        const Index l = pick(gen);
        const Vector psi = particles.row(l).transpose();
        const Vector theta = std::visit(
            [&](const auto& g) -> Vector { return g.sample(psi, 1, gen).row(0).transpose(); },
            guide);
        out.means.row(s) = model.predict_means(theta, inputs).col(0).transpose();
        out.noise_sd(s) = model.noise_sd(theta);
        out.particle[static_cast<std::size_t>(s)] = l;
    }
    return out;
}

std::string RecoveryPoint::to_string() const {
    if (particles) return std::to_string(*particles);
    return ">" + std::to_string(tested_up_to);
}

RecoveryPoint recovery_point(double smi_lppd, const std::function<double(Index)>& svgd_runner,
                             Index max_particles) {
    if (max_particles < 1) throw InvalidInput("max_particles must be >= 1");
    RecoveryPoint out;
    for (Index count = 1; count <= max_particles; count *= 2) {
        out.tested_up_to = count;
        if (svgd_runner(count) > smi_lppd) {
            out.particles = count;
            return out;
        }
    }
    return out;
}

}  // namespace smi
