#include <gtest/gtest.h>

#include <cmath>

#include "smi/gradcheck.hpp"
#include "smi/kernel.hpp"

using namespace smi;

TEST(RbfKernel, UnitDistanceValueAndGradient) {
    const RbfKernel k(1.0);
    Vector x(2), y(2);
    x << 1.0, 0.0;
    y << 0.0, 0.0;
    EXPECT_NEAR(k.eval(x, y), 0.36787944117144233, 1e-15);
    const Vector g = k.grad_first(x, y);
    EXPECT_NEAR(g(0), -0.73575888234288467, 1e-15);
    EXPECT_EQ(g(1), 0.0);
}

TEST(RbfKernel, SymmetricAndOneOnDiagonal) {
    const RbfKernel k(2.5);
    Vector x(3), y(3);
    x << 0.3, -1.0, 2.0;
    y << 1.1, 0.4, -0.2;
    EXPECT_DOUBLE_EQ(k.eval(x, y), k.eval(y, x));
    EXPECT_DOUBLE_EQ(k.eval(x, x), 1.0);
    EXPECT_TRUE(k.grad_first(x, x).isZero(0.0));
}

TEST(RbfKernel, GradientMatchesFiniteDifferences) {
    const RbfKernel k(0.7);
    Vector x(3), y(3);
    x << 0.2, -0.5, 0.9;
    y << -0.4, 0.1, 0.3;
    const Vector fd = finite_difference_gradient([&](const Vector& v) { return k.eval(v, y); }, x);
    EXPECT_LT(gradient_relative_error(k.grad_first(x, y), fd), 1e-8);
}

TEST(RbfKernel, RejectsBadArguments) {
    EXPECT_THROW(RbfKernel(0.0), InvalidConfig);
    EXPECT_THROW(RbfKernel(-1.0), InvalidConfig);
    EXPECT_THROW(RbfKernel(std::nan("")), InvalidConfig);
    const RbfKernel k(1.0);
    EXPECT_THROW(k.eval(Vector::Zero(2), Vector::Zero(3)), InvalidInput);
}

TEST(MedianBandwidth, ThreePointsOnALine) {
    Matrix p(3, 1);
    p << 0.0, 1.0, 3.0;
    // distances {1, 3, 2}: median 2, divided by ln 3
    EXPECT_NEAR(median_bandwidth(p), 4.0 / std::log(3.0), 1e-12);
    EXPECT_NEAR(median_bandwidth(p), 3.6409569, 1e-6);
}

TEST(MedianBandwidth, EvenCountAveragesMiddlePair) {
    Matrix p(4, 1);
    p << 0.0, 1.0, 2.0, 4.0;
    // distances {1, 2, 4, 1, 3, 2}: middle pair (2, 2)
    EXPECT_NEAR(median_bandwidth(p), 4.0 / std::log(4.0), 1e-12);

    Matrix q(2, 1);
    q << 0.0, 2.0;  // ln 2 < 1, so the divisor is 1
    EXPECT_DOUBLE_EQ(median_bandwidth(q), 4.0);
}

TEST(MedianBandwidth, DegenerateEnsembles) {
    EXPECT_DOUBLE_EQ(median_bandwidth(Matrix::Constant(1, 3, 5.0)), 1.0);
    EXPECT_DOUBLE_EQ(median_bandwidth(Matrix::Constant(4, 2, 0.5)), kBandwidthFloor);
    EXPECT_THROW(median_bandwidth(Matrix(0, 2)), InvalidInput);
}

TEST(KernelMatrix, MatchesPairwiseEvaluation) {
    Matrix p(3, 2);
    p << 0.0, 0.0, 1.0, 0.5, -0.3, 2.0;
    const RbfKernel k(1.3);
    const Matrix km = kernel_matrix(k, p);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j)
            EXPECT_DOUBLE_EQ(km(i, j), k.eval(p.row(i).transpose(), p.row(j).transpose()));
}
