#include "smi/guide.hpp"

namespace smi {

Vector GaussianGuide::make_particle(const Vector& loc, const Vector& scale) const {
    if (loc.size() != dim_ || scale.size() != dim_)
        throw InvalidInput("loc/scale length does not match guide");
    Vector psi(2 * dim_);
    psi.head(dim_) = loc;
    for (Index j = 0; j < dim_; ++j) psi(dim_ + j) = inverse_softplus(scale(j));
    return psi;
}

Moments mixture_moments(const GaussianGuide& guide, const Matrix& particles) {
    const Index m = particles.rows();
    const Index d = guide.latent_dim();
    if (m < 1) throw InvalidInput("mixture needs at least one particle");
    if (particles.cols() != guide.particle_dim())
        throw InvalidInput("particle matrix has wrong width for guide");

    const Matrix locs = particles.leftCols(d);
    Vector mean = locs.colwise().mean().transpose();
    // Law of total covariance: E[diag(scale^2)] + Cov(loc).
    Matrix cov = Matrix::Zero(d, d);
    for (Index l = 0; l < m; ++l) {
        const Vector s = guide.scale(particles.row(l).transpose());
        cov.diagonal() += s.cwiseProduct(s);
        const Vector c = locs.row(l).transpose() - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(m);
    return {std::move(mean), std::move(cov)};
}

ParticleLayout layout_of(const Guide& guide) {
    if (const auto* g = std::get_if<GaussianGuide>(&guide)) return {g->latent_dim(), g->latent_dim()};
    return {latent_dim(guide), 0};
}

}  // namespace smi
