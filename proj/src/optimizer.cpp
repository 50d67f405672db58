#include "smi/optimizer.hpp"

#include <cmath>

namespace smi {

std::string to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::Adagrad: return "adagrad";
    }
    return "?";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::Sgd;
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "adagrad") return OptimizerKind::Adagrad;
    throw InvalidConfig("unknown optimizer '" + name + "'");
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidConfig("optimizer.learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw InvalidConfig("optimizer betas must lie in [0, 1)");
    if (!(epsilon > 0.0) || !(adagrad_epsilon > 0.0))
        throw InvalidConfig("optimizer epsilon must be positive");
    if (adagrad_initial_accumulator < 0.0)
        throw InvalidConfig("optimizer.adagrad_initial_accumulator must be nonnegative");
}

Optimizer::Optimizer(OptimizerConfig config, Index rows, Index cols) : config_(config) {
    config_.validate();
    m1_ = Matrix::Zero(rows, cols);
    m2_ = Matrix::Constant(rows, cols,
                           config_.kind == OptimizerKind::Adagrad
                               ? config_.adagrad_initial_accumulator
                               : 0.0);
}

void Optimizer::ascend(Matrix& params, const Matrix& direction) {
    if (params.rows() != m1_.rows() || params.cols() != m1_.cols() ||
        direction.rows() != params.rows() || direction.cols() != params.cols())
        throw InvalidInput("optimizer shape mismatch");
    ++t_;
    const double lr = config_.learning_rate;
    switch (config_.kind) {
        case OptimizerKind::Sgd:
            params.noalias() += lr * direction;
            break;
        case OptimizerKind::Adam: {
            const double b1 = config_.beta1;
            const double b2 = config_.beta2;
            m1_ = b1 * m1_ + (1.0 - b1) * direction;
            m2_ = b2 * m2_ + (1.0 - b2) * direction.cwiseProduct(direction);
            const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
            params.array() +=
                lr * (m1_.array() / c1) / ((m2_.array() / c2).sqrt() + config_.epsilon);
            break;
        }
        case OptimizerKind::Adagrad:
            m2_.array() += direction.array().square();
            params.array() += lr * direction.array() / (m2_.array().sqrt() + config_.adagrad_epsilon);
            break;
    }
}

void Optimizer::restore(long long iterations, Matrix first_moment, Matrix second_moment) {
    if (first_moment.rows() != m1_.rows() || first_moment.cols() != m1_.cols() ||
        second_moment.rows() != m2_.rows() || second_moment.cols() != m2_.cols())
        throw InvalidInput("optimizer state has wrong shape");
    t_ = iterations;
    m1_ = std::move(first_moment);
    m2_ = std::move(second_moment);
}

}  // namespace smi
