#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace smi {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Caller handed us something that violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A configuration value is out of its admissible range.
class InvalidConfig : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value. Carries the offending point
/// (latent or particle coordinates) so the failure can be reproduced.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, Vector point, Index particle = -1)
        : std::runtime_error(what), point_(std::move(point)), particle_(particle) {}

    const Vector& point() const noexcept { return point_; }
    Index particle() const noexcept { return particle_; }

private:
    Vector point_;
    Index particle_;
};

}  // namespace smi
