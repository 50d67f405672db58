#include <gtest/gtest.h>

#include <cmath>

#include "smi/gradcheck.hpp"
#include "smi/guide.hpp"
#include "smi/invariants.hpp"

using namespace smi;

namespace {

Vector particle(const GaussianGuide& g, std::initializer_list<double> loc,
                std::initializer_list<double> scale) {
    Vector l(static_cast<Index>(loc.size())), s(static_cast<Index>(scale.size()));
    Index i = 0;
    for (double v : loc) l(i++) = v;
    i = 0;
    for (double v : scale) s(i++) = v;
    return g.make_particle(l, s);
}

}  // namespace

TEST(GaussianGuide, LogDensityValues) {
    const GaussianGuide g1(1);
    const Vector p1 = particle(g1, {0.4}, {1.0});
    EXPECT_NEAR(g1.log_density(Vector::Constant(1, 0.4), p1), -0.91893853320467274, 1e-12);

    const GaussianGuide g2(2);
    const Vector p2 = particle(g2, {0.0, 1.0}, {1.0, 1.0});
    Vector th(2);
    th << 1.0, 2.0;
    EXPECT_NEAR(g2.log_density(th, p2), -2.8378770664093453, 1e-12);
}

TEST(GaussianGuide, DensityIntegratesToOne) {
    const GaussianGuide g(1);
    const Vector p = particle(g, {0.3}, {0.7});
    const int n = 20001;
    const double lo = -8.0, hi = 8.0, dx = (hi - lo) / (n - 1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        sum += w * std::exp(g.log_density(Vector::Constant(1, lo + i * dx), p));
    }
    EXPECT_NEAR(sum * dx, 1.0, 1e-9);
}

TEST(GaussianGuide, ScoreHasMeanZero) {
    const GaussianGuide g(2);
    const Vector p = particle(g, {0.5, -1.0}, {0.8, 1.7});
    SplitMix64 gen(42);
    const Index n = 200000;
    const Matrix draws = g.sample(p, n, gen);
    Vector mean = Vector::Zero(4), sq = Vector::Zero(4);
    for (Index s = 0; s < n; ++s) {
        const Vector sc = g.grad_psi_log_density(draws.row(s).transpose(), p);
        mean += sc;
        sq += sc.cwiseProduct(sc);
    }
    mean /= n;
    const Vector se = ((sq / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    for (Index j = 0; j < 4; ++j) EXPECT_LT(std::abs(mean(j)), 4.0 * se(j)) << j;
}

TEST(GaussianGuide, SampleIsReparameterized) {
    const GaussianGuide g(3);
    const Vector p = particle(g, {1.0, 2.0, 3.0}, {0.1, 0.5, 2.0});
    SplitMix64 a(9), b(9);
    const Matrix draws = g.sample(p, 4, a);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index r = 0; r < 4; ++r) {
        Vector eps(3);
        for (Index j = 0; j < 3; ++j) eps(j) = normal(b);
        EXPECT_TRUE(draws.row(r).transpose().isApprox(g.transform(p, eps), 1e-15));
    }
}

TEST(GaussianGuide, ScoreMatchesFiniteDifferences) {
    EXPECT_LT(guide_gradient_error(3, 50, 1), 1e-6);
    const GaussianGuide g(2);
    const Vector p = particle(g, {0.2, -0.1}, {0.6, 1.4});
    Vector th(2);
    th << 0.9, -1.2;
    const Vector fd = finite_difference_gradient([&](const Vector& q) { return g.log_density(th, q); }, p);
    EXPECT_LT(gradient_relative_error(g.grad_psi_log_density(th, p), fd), 1e-8);
    const Vector fdt = finite_difference_gradient([&](const Vector& t) { return g.log_density(t, p); }, th);
    EXPECT_LT(gradient_relative_error(g.grad_theta_log_density(th, p), fdt), 1e-8);
}

TEST(GaussianGuide, RejectsWrongShapes) {
    EXPECT_THROW(GaussianGuide(0), InvalidConfig);
    const GaussianGuide g(2);
    EXPECT_THROW(g.log_density(Vector::Zero(3), Vector::Zero(4)), InvalidInput);
    EXPECT_THROW(g.scale(Vector::Zero(3)), InvalidInput);
}

TEST(PointMassGuide, SampleRepeatsParticle) {
    const PointMassGuide g(3);
    Vector p(3);
    p << 1.0, -2.0, 0.5;
    SplitMix64 gen(0);
    const Matrix draws = g.sample(p, 5, gen);
    for (Index r = 0; r < 5; ++r) EXPECT_EQ(draws.row(r).transpose(), p);
    EXPECT_EQ(layout_of(Guide(g)).raw_scale_dim, 0);
    EXPECT_EQ(layout_of(Guide(GaussianGuide(3))).raw_scale_dim, 3);
}

TEST(Mixture, LogSumExp) {
    Vector v(3);
    v << 1000.0, 1000.0, -std::numeric_limits<double>::infinity();
    EXPECT_NEAR(log_sum_exp(v), 1000.0 + std::log(2.0), 1e-12);
    const Vector all_neg = Vector::Constant(2, -std::numeric_limits<double>::infinity());
    EXPECT_EQ(log_sum_exp(all_neg), -std::numeric_limits<double>::infinity());
}

TEST(Mixture, DensityOfRepeatedComponentEqualsComponent) {
    const GaussianGuide g(2);
    const Vector p = particle(g, {0.1, 0.2}, {0.5, 0.9});
    Matrix two(2, 4);
    two.row(0) = p.transpose();
    two.row(1) = p.transpose();
    Vector th(2);
    th << -0.3, 0.7;
    EXPECT_NEAR(mixture_log_density(g, two, th), g.log_density(th, p), 1e-14);
}

TEST(Mixture, MomentsOfTwoComponents) {
    const GaussianGuide g(1);
    Matrix ps(2, 2);
    ps.row(0) = particle(g, {-1.0}, {0.5}).transpose();
    ps.row(1) = particle(g, {1.0}, {0.5}).transpose();
    const Moments mom = mixture_moments(g, ps);
    EXPECT_NEAR(mom.mean(0), 0.0, 1e-15);
    EXPECT_NEAR(mom.covariance(0, 0), 0.25 + 1.0, 1e-12);
}
