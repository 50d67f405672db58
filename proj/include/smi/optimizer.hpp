#pragma once

#include <string>

#include "smi/types.hpp"

namespace smi {

enum class OptimizerKind { Sgd, Adam, Adagrad };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double adagrad_epsilon = 1e-10;
    double adagrad_initial_accumulator = 0.0;

    void validate() const;
};

/// First-order optimizer over a block of parameters (one row per particle).
/// `ascend` treats its argument as an ascent direction.
class Optimizer {
public:
    Optimizer(OptimizerConfig config, Index rows, Index cols);

    void ascend(Matrix& params, const Matrix& direction);

    const OptimizerConfig& config() const noexcept { return config_; }
    long long iterations() const noexcept { return t_; }

    // State access for checkpoints.
    const Matrix& first_moment() const noexcept { return m1_; }
    const Matrix& second_moment() const noexcept { return m2_; }
    void restore(long long iterations, Matrix first_moment, Matrix second_moment);

private:
    OptimizerConfig config_;
    long long t_ = 0;
    Matrix m1_;  // Adam first moment
    Matrix m2_;  // Adam second moment, or the Adagrad accumulator
};

}  // namespace smi
