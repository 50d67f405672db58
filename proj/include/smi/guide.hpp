#pragma once

#include <cmath>
#include <variant>

#include "smi/model.hpp"
#include "smi/rng.hpp"
#include "smi/types.hpp"

namespace smi {

/// Mean-field Gaussian q(theta | psi) with psi = (loc, raw_scale) and
/// scale = softplus(raw_scale). Particles therefore live in R^{2d}.
class GaussianGuide {
public:
    explicit GaussianGuide(Index latent_dim) : dim_(latent_dim) {
        if (dim_ < 1) throw InvalidConfig("guide latent_dim must be >= 1");
    }

    Index latent_dim() const noexcept { return dim_; }
    Index particle_dim() const noexcept { return 2 * dim_; }

    template <typename P>
    auto loc(const Eigen::MatrixBase<P>& psi) const {
        return psi.head(dim_);
    }
    template <typename P>
    Vector scale(const Eigen::MatrixBase<P>& psi) const {
        check_psi(psi);
        return psi.tail(dim_).unaryExpr([](double r) { return softplus(r); });
    }

    /// Particle with the given location and (positive) scale.
    Vector make_particle(const Vector& loc, const Vector& scale) const;

    /// Reparameterized draw theta = loc + scale * eps for one noise vector.
    template <typename P, typename E>
    Vector transform(const Eigen::MatrixBase<P>& psi, const Eigen::MatrixBase<E>& eps) const {
        return loc(psi) + scale(psi).cwiseProduct(eps);
    }

    /// n_draws rows of reparameterized draws.
    template <typename P, typename Gen>
    Matrix sample(const Eigen::MatrixBase<P>& psi, Index n_draws, Gen& gen) const {
        if (n_draws < 1) throw InvalidInput("n_draws must be >= 1");
        const Vector s = scale(psi);
        Matrix out(n_draws, dim_);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index r = 0; r < n_draws; ++r)
            for (Index j = 0; j < dim_; ++j) out(r, j) = psi(j) + s(j) * normal(gen);
        return out;
    }

    template <typename T, typename P>
    double log_density(const Eigen::MatrixBase<T>& theta, const Eigen::MatrixBase<P>& psi) const {
        check_theta(theta);
        double lp = 0.0;
        for (Index j = 0; j < dim_; ++j) {
            const double s = softplus(psi(dim_ + j));
            const double z = (theta(j) - psi(j)) / s;
            lp += -0.5 * z * z - std::log(s) - kHalfLog2Pi;
        }
        return lp;
    }

    /// Score in (loc, raw_scale), including the softplus chain rule.
    template <typename T, typename P>
    Vector grad_psi_log_density(const Eigen::MatrixBase<T>& theta,
                                const Eigen::MatrixBase<P>& psi) const {
        check_theta(theta);
        Vector g(2 * dim_);
        for (Index j = 0; j < dim_; ++j) {
            const double r = psi(dim_ + j);
            const double s = softplus(r);
            const double z = (theta(j) - psi(j)) / s;
            g(j) = z / s;
            g(dim_ + j) = (z * z - 1.0) / s * sigmoid(r);
        }
        return g;
    }

    template <typename T, typename P>
    Vector grad_theta_log_density(const Eigen::MatrixBase<T>& theta,
                                  const Eigen::MatrixBase<P>& psi) const {
        const Vector s = scale(psi);
        return -(theta - loc(psi)).cwiseQuotient(s.cwiseProduct(s));
    }

    static constexpr double kHalfLog2Pi = 0.91893853320467274178;

private:
    template <typename P>
    void check_psi(const Eigen::MatrixBase<P>& psi) const {
        if (psi.size() != 2 * dim_) throw InvalidInput("particle has wrong length for guide");
    }
    template <typename T>
    void check_theta(const Eigen::MatrixBase<T>& theta) const {
        if (theta.size() != dim_) throw InvalidInput("theta has wrong length for guide");
    }

    Index dim_;
};

/// Point mass at psi. Sampling returns psi; there is no density. Through
/// the attractive-force path it turns SMI into SVGD.
class PointMassGuide {
public:
    explicit PointMassGuide(Index latent_dim) : dim_(latent_dim) {
        if (dim_ < 1) throw InvalidConfig("guide latent_dim must be >= 1");
    }

    Index latent_dim() const noexcept { return dim_; }
    Index particle_dim() const noexcept { return dim_; }

    template <typename P, typename Gen>
    Matrix sample(const Eigen::MatrixBase<P>& psi, Index n_draws, Gen&) const {
        if (n_draws < 1) throw InvalidInput("n_draws must be >= 1");
        return psi.transpose().replicate(n_draws, 1);
    }

private:
    Index dim_;
};

using Guide = std::variant<GaussianGuide, PointMassGuide>;

inline Index particle_dim(const Guide& guide) {
    return std::visit([](const auto& g) { return g.particle_dim(); }, guide);
}
inline Index latent_dim(const Guide& guide) {
    return std::visit([](const auto& g) { return g.latent_dim(); }, guide);
}

/// Stable log(sum(exp(v))); -inf for an all -inf input.
template <typename Derived>
double log_sum_exp(const Eigen::DenseBase<Derived>& v) {
    const double top = v.maxCoeff();
    if (!std::isfinite(top)) return top;
    return top + std::log((v.derived().array() - top).exp().sum());
}

/// log of the uniform mixture (1/m) sum_l q(theta | psi_l) over the rows of
/// `particles`.
template <typename M, typename T>
double mixture_log_density(const GaussianGuide& guide, const Eigen::MatrixBase<M>& particles,
                           const Eigen::MatrixBase<T>& theta) {
    const Index m = particles.rows();
    if (m < 1) throw InvalidInput("mixture needs at least one particle");
    if (m == 1) return guide.log_density(theta, particles.row(0).transpose());
    Vector lq(m);
    for (Index l = 0; l < m; ++l) lq(l) = guide.log_density(theta, particles.row(l).transpose());
    return log_sum_exp(lq) - std::log(static_cast<double>(m));
}

/// Exact mean and covariance of the Gaussian mixture encoded by `particles`.
struct Moments {
    Vector mean;
    Matrix covariance;
};
Moments mixture_moments(const GaussianGuide& guide, const Matrix& particles);

/// Layout descriptor written next to particle snapshots.
struct ParticleLayout {
    Index loc_dim;
    Index raw_scale_dim;
};
ParticleLayout layout_of(const Guide& guide);

}  // namespace smi
