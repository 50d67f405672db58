#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "smi/types.hpp"

namespace smi {

/// N records of inputs (N x p) and targets (N x q).
struct Dataset {
    Matrix inputs;
    Matrix targets;

    Dataset() = default;
    Dataset(Matrix x, Matrix y);

    Index size() const noexcept { return inputs.rows(); }
    Index input_dim() const noexcept { return inputs.cols(); }
    Index target_dim() const noexcept { return targets.cols(); }
    bool empty() const noexcept { return inputs.rows() == 0; }
};

/// Which records enter the likelihood: all of them, or an explicit subset
/// whose log-likelihood is rescaled by N / |I|.
class Batch {
public:
    static Batch full() { return Batch(); }
    static Batch of(std::vector<Index> indices) { return Batch(std::move(indices)); }

    bool is_full() const noexcept { return !indices_.has_value(); }
    const std::vector<Index>& indices() const { return *indices_; }

private:
    Batch() = default;
    explicit Batch(std::vector<Index> idx) : indices_(std::move(idx)) {}

    std::optional<std::vector<Index>> indices_;
};

/// A target p(theta, D) with its gradient in theta.
///
/// The joint splits as log p(theta) + sum_n log p(x_n | theta). Subclasses
/// provide the prior and the per-record terms; batching and the N/|I|
/// rescaling of the subsampled likelihood live here.
class LogJointModel {
public:
    virtual ~LogJointModel() = default;

    virtual Index latent_dim() const = 0;
    virtual Index data_size() const { return 0; }

    virtual double log_prior(const Vector& theta) const = 0;
    virtual double point_log_likelihood(const Vector& theta, Index n) const;

    double log_joint(const Vector& theta, const Batch& batch = Batch::full()) const;
    Vector grad_log_joint(const Vector& theta, const Batch& batch = Batch::full()) const;
    /// Both at once; overwrites `grad`. Cheaper where the forward pass is shared.
    double log_joint_and_grad(const Vector& theta, const Batch& batch, Vector& grad) const;
    /// Log joint at every row of `thetas`, and the gradients as rows of
    /// `grads` when given. Agrees with row-by-row evaluation up to rounding.
    Vector log_joint_rows(const Matrix& thetas, const Batch& batch = Batch::full(),
                          Matrix* grads = nullptr) const;

    /// Mutation hook for the sanity suite: drops the N/|I| exponent of the
    /// subsampled likelihood. Never enabled outside fault-injection runs.
    void inject_wrong_minibatch_exponent(bool on) noexcept { wrong_exponent_ = on; }

protected:
    virtual void add_grad_log_prior(const Vector& theta, Vector& grad) const = 0;
    virtual void add_grad_point_log_likelihood(const Vector& theta, Index n, double weight,
                                               Vector& grad) const;

    /// Sum of per-record log-likelihoods over `indices` (all records when
    /// null). Overridden where a vectorized pass is cheaper than the loop.
    virtual double log_likelihood_sum(const Vector& theta, const std::vector<Index>* indices) const;
    virtual void add_grad_log_likelihood_sum(const Vector& theta,
                                             const std::vector<Index>* indices, double weight,
                                             Vector& grad) const;
    /// Unweighted sum, with the weighted gradient added to `grad`.
    virtual double log_likelihood_sum_and_grad(const Vector& theta,
                                               const std::vector<Index>* indices, double weight,
                                               Vector& grad) const;
    /// Row-wise version: unweighted sums into `sums`, weighted gradients
    /// added to the rows of `grads` when non-null.
    virtual void log_likelihood_rows(const Matrix& thetas, const std::vector<Index>* indices,
                                     double weight, Vector& sums, Matrix* grads) const;

private:
    void check_theta(const Vector& theta) const;
    double batch_scale(const Batch& batch) const;

    bool wrong_exponent_ = false;
};

/// Isotropic Gaussian density N(mean, variance * I) with no data.
class GaussianTarget final : public LogJointModel {
public:
    GaussianTarget(Vector mean, double variance = 1.0);
    static GaussianTarget standard(Index dim) { return GaussianTarget(Vector::Zero(dim), 1.0); }

    Index latent_dim() const override { return mean_.size(); }
    double log_prior(const Vector& theta) const override;

    const Vector& mean() const noexcept { return mean_; }
    double variance() const noexcept { return variance_; }

protected:
    void add_grad_log_prior(const Vector& theta, Vector& grad) const override;

private:
    Vector mean_;
    double variance_;
};

/// theta ~ N(prior_mean, prior_sd^2 I), y_n ~ N(theta, noise_sd^2 I) with
/// y_n the rows of `observations`. Posterior and evidence are closed form.
class ConjugateGaussianModel final : public LogJointModel {
public:
    ConjugateGaussianModel(Matrix observations, double prior_sd, double noise_sd,
                           double prior_mean = 0.0);

    Index latent_dim() const override { return dim_; }
    Index data_size() const override { return y_.rows(); }
    double log_prior(const Vector& theta) const override;
    double point_log_likelihood(const Vector& theta, Index n) const override;

    Vector posterior_mean() const;
    double posterior_sd() const;
    double log_evidence() const;

protected:
    void add_grad_log_prior(const Vector& theta, Vector& grad) const override;
    void add_grad_point_log_likelihood(const Vector& theta, Index n, double weight,
                                       Vector& grad) const override;

private:
    Matrix y_;
    Index dim_;
    double prior_sd_;
    double noise_sd_;
    double prior_mean_;
};

enum class Activation { Tanh, Relu };

/// Observation noise of the BNN: fixed standard deviation, or a latent
/// precision with a Gamma(shape, rate) prior carried in unconstrained space
/// through softplus (the log-Jacobian is part of the prior).
struct NoiseModel {
    enum class Kind { FixedSigma, GammaPrecision };
    Kind kind = Kind::FixedSigma;
    double sigma = 0.1;
    double gamma_shape = 1.0;
    double gamma_rate = 0.1;

    static NoiseModel fixed(double sd) { return {Kind::FixedSigma, sd, 1.0, 0.1}; }
    static NoiseModel gamma_precision(double shape = 1.0, double rate = 0.1) {
        return {Kind::GammaPrecision, 0.1, shape, rate};
    }
};

/// One-hidden-layer regression network with standard normal priors on all
/// weights and biases and a Gaussian likelihood.
///
/// Latent layout: W1 (H x p, row-major), b1 (H), W2 (q x H, row-major),
/// b2 (q), then the raw precision when the noise is latent.
struct BnnWorkspace;

class BnnRegressionModel final : public LogJointModel {
public:
    BnnRegressionModel(Dataset data, Index hidden_dim, Activation activation, NoiseModel noise);

    static Index latent_dim_for(Index input_dim, Index hidden_dim, Index output_dim,
                                bool latent_precision) {
        return (input_dim + 1) * hidden_dim + (hidden_dim + 1) * output_dim +
               (latent_precision ? 1 : 0);
    }

    Index latent_dim() const override { return latent_dim_; }
    Index data_size() const override { return data_.size(); }
    double log_prior(const Vector& theta) const override;
    double point_log_likelihood(const Vector& theta, Index n) const override;

    /// Network output f(x) for one input row.
    Vector predict_mean(const Vector& theta, const Eigen::Ref<const Vector>& x) const;
    /// Network outputs for every row of `inputs`, as an n x q matrix.
    Matrix predict_means(const Vector& theta, const Matrix& inputs) const;
    /// Predictive noise standard deviation under theta.
    double noise_sd(const Vector& theta) const;

    const Dataset& data() const noexcept { return data_; }
    Index hidden_dim() const noexcept { return hidden_; }
    Activation activation() const noexcept { return activation_; }
    const NoiseModel& noise() const noexcept { return noise_; }

protected:
    void add_grad_log_prior(const Vector& theta, Vector& grad) const override;
    void add_grad_point_log_likelihood(const Vector& theta, Index n, double weight,
                                       Vector& grad) const override;
    double log_likelihood_sum(const Vector& theta,
                              const std::vector<Index>* indices) const override;
    void add_grad_log_likelihood_sum(const Vector& theta, const std::vector<Index>* indices,
                                     double weight, Vector& grad) const override;
    double log_likelihood_sum_and_grad(const Vector& theta, const std::vector<Index>* indices,
                                       double weight, Vector& grad) const override;
    void log_likelihood_rows(const Matrix& thetas, const std::vector<Index>* indices,
                             double weight, Vector& sums, Matrix* grads) const override;

private:
    double likelihood_pass(const Vector& theta, const Matrix& xt, const Matrix& yt, double weight,
                           Vector* grad, BnnWorkspace& ws) const;
    double precision(const Vector& theta) const;
    Matrix gather_inputs(const std::vector<Index>* indices) const;
    Matrix gather_targets(const std::vector<Index>* indices) const;
    Index weight_count() const { return latent_dim_ - (latent_precision() ? 1 : 0); }
    bool latent_precision() const { return noise_.kind == NoiseModel::Kind::GammaPrecision; }

    Dataset data_;
    Index hidden_;
    Activation activation_;
    NoiseModel noise_;
    Index latent_dim_;
};

/// Exact mean of the subsampled log joint over every batch of a fixed size,
/// next to the full-data value. Test oracle for unbiasedness.
struct MinibatchCheck {
    double estimator_mean;
    double exact_value;
    std::size_t subsets;
};

MinibatchCheck minibatch_expectation_check(const LogJointModel& model, const Vector& theta,
                                           Index batch_size);

/// `size` distinct indices from [0, n), sorted, drawn uniformly without
/// replacement.
template <typename Gen>
std::vector<Index> sample_batch_indices(Index n, Index size, Gen& gen);

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;
double inverse_softplus(double y);

}  // namespace smi

#include "smi/detail/batch_sampling.hpp"
