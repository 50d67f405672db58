#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "smi/dataset.hpp"
#include "smi/invariants.hpp"
#include "smi/metrics.hpp"

using namespace smi;

TEST(Metrics, UnbiasedMarginalVariance) {
    Matrix s(2, 1);
    s << -1.0, 1.0;
    EXPECT_DOUBLE_EQ(dimension_marginal_variance(s)(0), 2.0);
    EXPECT_THROW(dimension_marginal_variance(Matrix::Zero(1, 3)), InvalidInput);
}

TEST(Metrics, FrobeniusToIdentity) {
    EXPECT_DOUBLE_EQ(frobenius_to_identity_cov(Matrix::Zero(2, 2)), std::sqrt(2.0));
    Matrix c = Matrix::Identity(2, 2);
    c(0, 0) = 2.0;
    EXPECT_DOUBLE_EQ(frobenius_to_identity_cov(c), 1.0);
    Matrix s(3, 1);
    s << -1.0, 0.0, 1.0;  // unbiased variance 1
    EXPECT_NEAR(frobenius_to_identity(s), 0.0, 1e-15);
}

TEST(Metrics, HdiPicksNarrowestWindowAndBreaksTiesLow) {
    std::vector<double> s(10);
    std::iota(s.begin(), s.end(), 1.0);
    const Interval1d a = hdi(s, 0.9);
    EXPECT_EQ(a.low, 1.0);
    EXPECT_EQ(a.high, 9.0);

    const Interval1d b = hdi({0.0, 5.0, 5.1, 5.2, 20.0}, 0.6);
    EXPECT_EQ(b.low, 5.0);
    EXPECT_EQ(b.high, 5.2);
    EXPECT_EQ(hdi({3.0}, 0.9).width(), 0.0);
    EXPECT_THROW(hdi({}, 0.9), InvalidInput);
    EXPECT_THROW(hdi({1.0}, 0.0), InvalidInput);
}

TEST(Metrics, HdiOfGaussianDraws) {
    SplitMix64 gen(2);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> s(200000);
    for (auto& v : s) v = normal(gen);
    const Interval1d h = hdi(s, 0.9);
    EXPECT_NEAR(h.low, -1.6448536, 0.02);
    EXPECT_NEAR(h.high, 1.6448536, 0.02);
}

TEST(Metrics, LppdAndNll) {
    Matrix d(2, 2);
    d << 1.0, 3.0, 2.0, 2.0;
    const LppdResult r = lppd(d);
    EXPECT_TRUE(r.finite());
    EXPECT_NEAR(r.value, 2.0 * std::log(2.0), 1e-14);
    const Matrix logd = d.array().log().matrix();
    EXPECT_NEAR(lppd_from_log(logd).value, 2.0 * std::log(2.0), 1e-14);
    EXPECT_NEAR(nll(logd), -std::log(2.0), 1e-14);

    Matrix big(1, 2);
    big << -1000.0, -1001.0;
    EXPECT_NEAR(lppd_from_log(big).value, -1000.0 + std::log((1.0 + std::exp(-1.0)) / 2.0), 1e-10);
}

TEST(Metrics, LppdReportsDegenerateRows) {
    Matrix d(3, 2);
    d << 1.0, 1.0, 0.0, 0.0, 0.5, 0.0;
    const LppdResult r = lppd(d);
    EXPECT_FALSE(r.finite());
    ASSERT_EQ(r.degenerate_rows.size(), 1u);
    EXPECT_EQ(r.degenerate_rows[0], 1);
    EXPECT_EQ(r.value, -std::numeric_limits<double>::infinity());
    EXPECT_THROW(lppd(-d), InvalidInput);
}

TEST(Metrics, Rmse) {
    Vector p(2), t(2);
    p << 1.0, 2.0;
    t << 0.0, 4.0;
    EXPECT_NEAR(rmse(p, t), std::sqrt(2.5), 1e-15);
    EXPECT_THROW(rmse(p, Vector::Zero(3)), InvalidInput);
}

TEST(Metrics, RecoveryPointDoubling) {
    std::vector<Index> calls;
    auto runner = [&](Index c) {
        calls.push_back(c);
        return c >= 8 ? 0.0 : -2.0;
    };
    const RecoveryPoint r = recovery_point(-1.0, runner, 256);
    ASSERT_TRUE(r.particles.has_value());
    EXPECT_EQ(*r.particles, 8);
    EXPECT_EQ(calls, (std::vector<Index>{1, 2, 4, 8}));
    EXPECT_EQ(r.to_string(), "8");

    EXPECT_EQ(*recovery_point(-1.0, [](Index) { return 0.0; }, 256).particles, 1);

    const RecoveryPoint never = recovery_point(-1.0, [](Index) { return -5.0; }, 256);
    EXPECT_TRUE(never.at_limit());
    EXPECT_EQ(never.tested_up_to, 256);
    EXPECT_EQ(never.to_string(), ">256");

    // Equal LPPD does not count as exceeding.
    EXPECT_TRUE(recovery_point(-1.0, [](Index) { return -1.0; }, 4).at_limit());
}

TEST(Metrics, PredictiveSampleIsSeededAndShaped) {
    const BnnRegressionModel bnn = random_bnn(1, 3, 5, Activation::Tanh, NoiseModel::fixed(0.2), 1);
    const GaussianGuide guide(bnn.latent_dim());
    Matrix particles(2, guide.particle_dim());
    particles.leftCols(bnn.latent_dim()).setConstant(0.1);
    particles.row(1).head(bnn.latent_dim()).setConstant(-0.2);
    particles.rightCols(bnn.latent_dim()).setConstant(inverse_softplus(0.05));
    Matrix x(4, 1);
    x << -1.0, 0.0, 0.5, 1.0;
    const PredictiveSample a = predictive_sample(bnn, Guide(guide), particles, x, 50, 3);
    const PredictiveSample b = predictive_sample(bnn, Guide(guide), particles, x, 50, 3);
    EXPECT_EQ(a.means.rows(), 50);
    EXPECT_EQ(a.means.cols(), 4);
    EXPECT_EQ(a.means, b.means);
    EXPECT_EQ(a.observations(9), b.observations(9));
    EXPECT_TRUE((a.noise_sd.array() == 0.2).all());
    const Matrix ld = a.log_densities(Matrix::Zero(4, 1));
    EXPECT_EQ(ld.rows(), 4);
    EXPECT_EQ(ld.cols(), 50);
    const double expect =
        -0.5 * std::pow(a.means(7, 2) / 0.2, 2) - std::log(0.2) - 0.5 * std::log(2.0 * M_PI);
    EXPECT_NEAR(ld(2, 7), expect, 1e-12);
}
