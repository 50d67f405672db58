#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "smi/types.hpp"

namespace smi {

enum class KernelKind { Rbf };

/// Radial basis function kernel k(x, y) = exp(-|x - y|^2 / h), where the
/// bandwidth h is a squared length scale.
class RbfKernel {
public:
    explicit RbfKernel(double bandwidth = 1.0) : bandwidth_(bandwidth) {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
            throw InvalidConfig("RBF bandwidth must be finite and positive");
    }

    double bandwidth() const noexcept { return bandwidth_; }
    static constexpr KernelKind kind() noexcept { return KernelKind::Rbf; }

    template <typename A, typename B>
    double eval(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        check_dims(x, y);
        return std::exp(-(x - y).squaredNorm() / bandwidth_);
    }

    /// Gradient in the first argument: -(2/h) (x - y) k(x, y).
    template <typename A, typename B>
    Vector grad_first(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        check_dims(x, y);
        const double k = std::exp(-(x - y).squaredNorm() / bandwidth_);
        return (-2.0 / bandwidth_ * k) * (x - y);
    }

private:
    template <typename A, typename B>
    static void check_dims(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
        if (x.size() != y.size()) throw InvalidInput("kernel arguments differ in dimension");
        if (x.size() < 1) throw InvalidInput("kernel arguments must be non-empty");
    }

    double bandwidth_;
};

inline constexpr double kBandwidthFloor = 1e-8;

/// Median heuristic on the rows of `points`: med^2 / max(ln m, 1), where med
/// is the median pairwise Euclidean distance. A single particle gives 1;
/// fully coincident particles give the 1e-8 floor.
template <typename Derived>
double median_bandwidth(const Eigen::MatrixBase<Derived>& points) {
    const Index m = points.rows();
    if (m < 1) throw InvalidInput("median_bandwidth needs at least one point");
    if (m == 1) return 1.0;

    const Matrix cols = points.transpose();
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Index i = 0; i < m; ++i)
        for (Index j = i + 1; j < m; ++j) dist.push_back((cols.col(i) - cols.col(j)).norm());

    // Exact median: mean of the two middle elements for an even count.
    const std::size_t n = dist.size();
    const std::size_t mid = n / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double med = dist[mid];
    if (n % 2 == 0) {
        const double lower =
            *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        med = 0.5 * (med + lower);
    }

    const double h = med * med / std::max(std::log(static_cast<double>(m)), 1.0);
    return std::max(h, kBandwidthFloor);
}

/// Pairwise kernel matrix K(i, j) = k(row_i, row_j).
template <typename Derived>
Matrix kernel_matrix(const RbfKernel& kernel, const Eigen::MatrixBase<Derived>& points) {
    const Index m = points.rows();
    const Matrix cols = points.transpose();
    Matrix k(m, m);
    for (Index i = 0; i < m; ++i) {
        k(i, i) = 1.0;
        for (Index j = i + 1; j < m; ++j) {
            k(i, j) = kernel.eval(cols.col(i), cols.col(j));
            k(j, i) = k(i, j);
        }
    }
    return k;
}

}  // namespace smi
