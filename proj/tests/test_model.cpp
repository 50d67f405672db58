#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "smi/dataset.hpp"
#include "smi/gradcheck.hpp"
#include "smi/invariants.hpp"
#include "smi/model.hpp"
#include "smi/rng.hpp"

using namespace smi;

TEST(GaussianTarget, LogDensityAtMode) {
    const auto t = GaussianTarget::standard(2);
    EXPECT_NEAR(t.log_prior(Vector::Zero(2)), -std::log(2.0 * std::numbers::pi), 1e-14);
    EXPECT_NEAR(t.log_joint(Vector::Zero(2)), -1.8378770664093453, 1e-14);
}

TEST(GaussianTarget, GradientIsScaledResidual) {
    Vector mean(2);
    mean << 1.0, -2.0;
    const GaussianTarget t(mean, 4.0);
    Vector x(2);
    x << 3.0, 0.0;
    const Vector g = t.grad_log_joint(x);
    EXPECT_DOUBLE_EQ(g(0), -0.5);
    EXPECT_DOUBLE_EQ(g(1), -0.5);
    EXPECT_THROW(t.log_joint(Vector::Zero(3)), InvalidInput);
}

TEST(Wave, MeanFunctionValues) {
    EXPECT_NEAR(wave_mean(0.0), 1.0 - 1.5 * std::sqrt(3.0) / 2.0, 1e-14);
    EXPECT_NEAR(wave_mean(0.0), -0.29903810567665797, 1e-14);
    EXPECT_NEAR(wave_mean(1.0 / 3.0), 2.0, 1e-14);
}

TEST(Wave, ClustersStayInTheirIntervals) {
    const Dataset d = generate_wave_dataset(20, 7);
    ASSERT_EQ(d.size(), 40);
    for (Index i = 0; i < 20; ++i) {
        EXPECT_GE(d.inputs(i, 0), -1.5);
        EXPECT_LE(d.inputs(i, 0), -0.5);
        EXPECT_GE(d.inputs(20 + i, 0), 1.3);
        EXPECT_LE(d.inputs(20 + i, 0), 1.7);
    }
    const Dataset again = generate_wave_dataset(20, 7);
    EXPECT_EQ(d.inputs, again.inputs);
    EXPECT_EQ(d.targets, again.targets);
}

TEST(ConjugateGaussian, PosteriorMatchesClosedForm) {
    Matrix y(3, 1);
    y << 0.5, 1.5, 1.0;
    const ConjugateGaussianModel model(y, 2.0, 0.5);
    const double precision = 1.0 / 4.0 + 3.0 / 0.25;
    EXPECT_NEAR(model.posterior_sd(), 1.0 / std::sqrt(precision), 1e-14);
    EXPECT_NEAR(model.posterior_mean()(0), (3.0 / 0.25) / precision, 1e-14);
}

TEST(ConjugateGaussian, EvidenceMatchesQuadrature) {
    Matrix y(4, 1);
    y << -0.3, 0.8, 0.1, 0.4;
    const ConjugateGaussianModel model(y, 1.5, 0.7, 0.2);
    // Trapezoid rule on exp(log joint) over a wide grid.
    const int n = 40001;
    const double lo = -10.0, hi = 10.0, dx = (hi - lo) / (n - 1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        Vector th(1);
        th << lo + i * dx;
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        sum += w * std::exp(model.log_joint(th));
    }
    EXPECT_NEAR(model.log_evidence(), std::log(sum * dx), 1e-9);
}

TEST(Minibatch, SubsetAverageEqualsFullJoint) {
    for (Index n : {3, 4}) {
        const BnnRegressionModel bnn =
            random_bnn(1, 3, n, Activation::Tanh, NoiseModel::fixed(0.3), 11 + n);
        auto gen = stream(5, StreamPurpose::Initialization, 0);
        const Vector theta = standard_normal_vector(gen, bnn.latent_dim());
        const double full = bnn.log_joint(theta);
        for (Index size = 1; size <= n; ++size) {
            // Enumerate every subset of the given size by bitmask.
            double total = 0.0;
            int count = 0;
            for (int mask = 0; mask < (1 << n); ++mask) {
                if (__builtin_popcount(mask) != size) continue;
                std::vector<Index> idx;
                for (Index i = 0; i < n; ++i)
                    if (mask & (1 << i)) idx.push_back(i);
                total += bnn.log_joint(theta, Batch::of(idx));
                ++count;
            }
            EXPECT_NEAR(total / count, full, 1e-10 * std::max(1.0, std::abs(full)))
                << "N=" << n << " |I|=" << size;
            const MinibatchCheck mc = minibatch_expectation_check(bnn, theta, size);
            EXPECT_EQ(mc.subsets, static_cast<std::size_t>(count));
            EXPECT_NEAR(mc.estimator_mean, full, 1e-10 * std::max(1.0, std::abs(full)));
        }
    }
}

TEST(Minibatch, RescalesBySizeRatio) {
    Matrix y(4, 1);
    y << 1.0, 2.0, 3.0, 4.0;
    const ConjugateGaussianModel model(y, 1.0, 1.0);
    const Vector th = Vector::Constant(1, 0.5);
    const double expected =
        model.log_prior(th) + 2.0 * (model.point_log_likelihood(th, 1) + model.point_log_likelihood(th, 3));
    EXPECT_NEAR(model.log_joint(th, Batch::of({1, 3})), expected, 1e-13);
}

TEST(Minibatch, FaultHookBreaksUnbiasedness) {
    BnnRegressionModel bnn = random_bnn(1, 2, 4, Activation::Tanh, NoiseModel::fixed(0.3), 3);
    const Vector theta = Vector::Constant(bnn.latent_dim(), 0.2);
    bnn.inject_wrong_minibatch_exponent(true);
    const MinibatchCheck mc = minibatch_expectation_check(bnn, theta, 2);
    EXPECT_GT(std::abs(mc.estimator_mean - mc.exact_value), 1e-3);
}

TEST(Minibatch, BatchIndexSampling) {
    auto gen = stream(1, StreamPurpose::Minibatch, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const auto idx = sample_batch_indices(10, 4, gen);
        ASSERT_EQ(idx.size(), 4u);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            EXPECT_GE(idx[i], 0);
            EXPECT_LT(idx[i], 10);
            if (i) EXPECT_LT(idx[i - 1], idx[i]);
        }
    }
}

TEST(Bnn, LatentDimension) {
    EXPECT_EQ(BnnRegressionModel::latent_dim_for(1, 5, 1, false), 16);
    EXPECT_EQ(BnnRegressionModel::latent_dim_for(1, 100, 1, false), 301);
    EXPECT_EQ(BnnRegressionModel::latent_dim_for(8, 50, 1, true), 502);
}

TEST(Bnn, ZeroWeightsGiveHandComputedJoint) {
    Matrix x(2, 1), y(2, 1);
    x << 0.5, -1.0;
    y << 0.3, -0.2;
    const BnnRegressionModel bnn(Dataset(x, y), 2, Activation::Tanh, NoiseModel::fixed(0.5));
    const Index d = bnn.latent_dim();
    ASSERT_EQ(d, 7);
    const Vector zero = Vector::Zero(d);
    const double log_prior = -0.5 * d * std::log(2.0 * std::numbers::pi);
    auto normal_logpdf = [](double v, double sd) {
        return -0.5 * v * v / (sd * sd) - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
    };
    EXPECT_NEAR(bnn.log_prior(zero), log_prior, 1e-13);
    EXPECT_NEAR(bnn.log_joint(zero), log_prior + normal_logpdf(0.3, 0.5) + normal_logpdf(-0.2, 0.5),
                1e-13);
}

TEST(Bnn, ForwardPassByHand) {
    Matrix x(1, 1), y(1, 1);
    x << 0.7;
    y << 0.0;
    const BnnRegressionModel bnn(Dataset(x, y), 2, Activation::Relu, NoiseModel::fixed(1.0));
    Vector th(7);
    // W1 = (1, -1), b1 = (0.1, 0.2), W2 = (2, 3), b2 = 0.5
    th << 1.0, -1.0, 0.1, 0.2, 2.0, 3.0, 0.5;
    Vector in(1);
    in << 0.7;
    EXPECT_NEAR(bnn.predict_mean(th, in)(0), 2.0 * 0.8 + 3.0 * 0.0 + 0.5, 1e-14);
    Matrix many(3, 1);
    many << 0.7, -0.4, 1.9;
    const Matrix out = bnn.predict_means(th, many);
    for (Index i = 0; i < 3; ++i)
        EXPECT_NEAR(out(i, 0), bnn.predict_mean(th, many.row(i).transpose())(0), 1e-14);
}

TEST(Bnn, GradientsMatchFiniteDifferences) {
    EXPECT_LT(model_gradient_error(random_bnn(2, 4, 7, Activation::Tanh, NoiseModel::fixed(0.4), 2), 20, 3),
              1e-5);
    EXPECT_LT(model_gradient_error(
                  random_bnn(3, 3, 6, Activation::Relu, NoiseModel::gamma_precision(), 4), 20, 5),
              1e-5);
    EXPECT_LT(model_gradient_error(random_conjugate_model(3, 5, 9), 20, 6), 1e-5);
}

TEST(Bnn, LatentPrecisionNoise) {
    const BnnRegressionModel bnn =
        random_bnn(1, 2, 3, Activation::Tanh, NoiseModel::gamma_precision(), 8);
    Vector th = Vector::Zero(bnn.latent_dim());
    th(bnn.latent_dim() - 1) = inverse_softplus(4.0);
    EXPECT_NEAR(bnn.noise_sd(th), 0.5, 1e-12);
}

TEST(Softplus, Identities) {
    EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    for (double v : {1e-6, 0.1, 1.0, 5.0, 40.0}) EXPECT_NEAR(softplus(inverse_softplus(v)), v, 1e-12 * std::max(1.0, v));
    EXPECT_NEAR(softplus(-50.0), std::exp(-50.0), 1e-30);
    EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
    EXPECT_THROW(inverse_softplus(0.0), InvalidInput);
}
