#include "smi/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace smi {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

}  // namespace

double softplus(double x) noexcept {
    // log(1 + e^x) without overflow for large x or cancellation for small x.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double inverse_softplus(double y) {
    if (!(y > 0.0)) throw InvalidInput("inverse_softplus needs a positive argument");
    // log(e^y - 1) = y + log(1 - e^-y)
    return y + std::log(-std::expm1(-y));
}

Dataset::Dataset(Matrix x, Matrix y) : inputs(std::move(x)), targets(std::move(y)) {
    if (inputs.rows() != targets.rows())
        throw InvalidInput("dataset inputs and targets differ in row count");
    if (!inputs.allFinite() || !targets.allFinite())
        throw InvalidInput("dataset contains non-finite values");
}

// ---------------------------------------------------------------------------
// LogJointModel

double LogJointModel::point_log_likelihood(const Vector&, Index) const {
    throw InvalidInput("model has no data records");
}

void LogJointModel::add_grad_point_log_likelihood(const Vector&, Index, double, Vector&) const {
    throw InvalidInput("model has no data records");
}

double LogJointModel::log_likelihood_sum(const Vector& theta,
                                         const std::vector<Index>* indices) const {
    double sum = 0.0;
    if (indices == nullptr) {
        for (Index n = 0; n < data_size(); ++n) sum += point_log_likelihood(theta, n);
    } else {
        for (Index n : *indices) sum += point_log_likelihood(theta, n);
    }
    return sum;
}

void LogJointModel::add_grad_log_likelihood_sum(const Vector& theta,
                                                const std::vector<Index>* indices, double weight,
                                                Vector& grad) const {
    if (indices == nullptr) {
        for (Index n = 0; n < data_size(); ++n)
            add_grad_point_log_likelihood(theta, n, weight, grad);
    } else {
        for (Index n : *indices) add_grad_point_log_likelihood(theta, n, weight, grad);
    }
}

double LogJointModel::log_likelihood_sum_and_grad(const Vector& theta,
                                                  const std::vector<Index>* indices,
                                                  double weight, Vector& grad) const {
    add_grad_log_likelihood_sum(theta, indices, weight, grad);
    return log_likelihood_sum(theta, indices);
}

void LogJointModel::log_likelihood_rows(const Matrix& thetas, const std::vector<Index>* indices,
                                        double weight, Vector& sums, Matrix* grads) const {
    sums.resize(thetas.rows());
    Vector g(thetas.cols());
    for (Index r = 0; r < thetas.rows(); ++r) {
        const Vector th = thetas.row(r).transpose();
        if (grads) {
            g.setZero();
            sums(r) = log_likelihood_sum_and_grad(th, indices, weight, g);
            grads->row(r) += g.transpose();
        } else {
            sums(r) = log_likelihood_sum(th, indices);
        }
    }
}

void LogJointModel::check_theta(const Vector& theta) const {
    if (theta.size() != latent_dim())
        throw InvalidInput("theta has length " + std::to_string(theta.size()) + ", expected " +
                           std::to_string(latent_dim()));
}

double LogJointModel::batch_scale(const Batch& batch) const {
    if (batch.is_full()) return 1.0;
    const auto& idx = batch.indices();
    if (idx.empty()) throw InvalidInput("empty batch");
    for (Index n : idx)
        if (n < 0 || n >= data_size())
            throw InvalidInput("batch index " + std::to_string(n) + " outside [0, " +
                               std::to_string(data_size()) + ")");
    if (wrong_exponent_) return 1.0;
    return static_cast<double>(data_size()) / static_cast<double>(idx.size());
}

double LogJointModel::log_joint(const Vector& theta, const Batch& batch) const {
    check_theta(theta);
    const double scale = batch_scale(batch);
    double value = log_prior(theta);
    if (data_size() > 0) {
        const auto* idx = batch.is_full() ? nullptr : &batch.indices();
        value += scale * log_likelihood_sum(theta, idx);
    }
    if (!std::isfinite(value)) throw NumericalFailure("log_joint is not finite", theta);
    return value;
}

Vector LogJointModel::grad_log_joint(const Vector& theta, const Batch& batch) const {
    check_theta(theta);
    const double scale = batch_scale(batch);
    Vector grad = Vector::Zero(theta.size());
    add_grad_log_prior(theta, grad);
    if (data_size() > 0) {
        const auto* idx = batch.is_full() ? nullptr : &batch.indices();
        add_grad_log_likelihood_sum(theta, idx, scale, grad);
    }
    if (!grad.allFinite()) throw NumericalFailure("grad_log_joint is not finite", theta);
    return grad;
}

double LogJointModel::log_joint_and_grad(const Vector& theta, const Batch& batch,
                                         Vector& grad) const {
    check_theta(theta);
    const double scale = batch_scale(batch);
    grad.setZero(theta.size());
    add_grad_log_prior(theta, grad);
    double value = log_prior(theta);
    if (data_size() > 0) {
        const auto* idx = batch.is_full() ? nullptr : &batch.indices();
        value += scale * log_likelihood_sum_and_grad(theta, idx, scale, grad);
    }
    if (!std::isfinite(value)) throw NumericalFailure("log_joint is not finite", theta);
    if (!grad.allFinite()) throw NumericalFailure("grad_log_joint is not finite", theta);
    return value;
}

Vector LogJointModel::log_joint_rows(const Matrix& thetas, const Batch& batch,
                                     Matrix* grads) const {
    if (thetas.cols() != latent_dim())
        throw InvalidInput("theta rows have length " + std::to_string(thetas.cols()) +
                           ", expected " + std::to_string(latent_dim()));
    const double scale = batch_scale(batch);
    const Index rows = thetas.rows();
    Vector values(rows);
    if (grads) grads->setZero(rows, thetas.cols());
    Vector g(thetas.cols());
    for (Index r = 0; r < rows; ++r) {
        const Vector th = thetas.row(r).transpose();
        values(r) = log_prior(th);
        if (grads) {
            g.setZero();
            add_grad_log_prior(th, g);
            grads->row(r) = g.transpose();
        }
    }
    if (data_size() > 0) {
        const auto* idx = batch.is_full() ? nullptr : &batch.indices();
        Vector sums;
        log_likelihood_rows(thetas, idx, scale, sums, grads);
        values += scale * sums;
    }
    for (Index r = 0; r < rows; ++r) {
        if (!std::isfinite(values(r)))
            throw NumericalFailure("log_joint is not finite", thetas.row(r).transpose());
        if (grads && !grads->row(r).allFinite())
            throw NumericalFailure("grad_log_joint is not finite", thetas.row(r).transpose());
    }
    return values;
}

// ---------------------------------------------------------------------------
// GaussianTarget

GaussianTarget::GaussianTarget(Vector mean, double variance)
    : mean_(std::move(mean)), variance_(variance) {
    if (mean_.size() < 1) throw InvalidConfig("GaussianTarget needs dimension >= 1");
    if (!(variance_ > 0.0)) throw InvalidConfig("GaussianTarget variance must be positive");
}

double GaussianTarget::log_prior(const Vector& theta) const {
    const double d = static_cast<double>(mean_.size());
    return -0.5 * (theta - mean_).squaredNorm() / variance_ - d * kHalfLog2Pi -
           0.5 * d * std::log(variance_);
}

void GaussianTarget::add_grad_log_prior(const Vector& theta, Vector& grad) const {
    grad.noalias() -= (theta - mean_) / variance_;
}

// ---------------------------------------------------------------------------
// ConjugateGaussianModel

ConjugateGaussianModel::ConjugateGaussianModel(Matrix observations, double prior_sd,
                                               double noise_sd, double prior_mean)
    : y_(std::move(observations)),
      dim_(y_.cols()),
      prior_sd_(prior_sd),
      noise_sd_(noise_sd),
      prior_mean_(prior_mean) {
    if (dim_ < 1) throw InvalidConfig("ConjugateGaussianModel needs dimension >= 1");
    if (!(prior_sd_ > 0.0) || !(noise_sd_ > 0.0))
        throw InvalidConfig("ConjugateGaussianModel scales must be positive");
    if (!y_.allFinite()) throw InvalidInput("observations contain non-finite values");
}

double ConjugateGaussianModel::log_prior(const Vector& theta) const {
    const double d = static_cast<double>(dim_);
    return -0.5 * (theta.array() - prior_mean_).square().sum() / (prior_sd_ * prior_sd_) -
           d * (kHalfLog2Pi + std::log(prior_sd_));
}

double ConjugateGaussianModel::point_log_likelihood(const Vector& theta, Index n) const {
    const double d = static_cast<double>(dim_);
    return -0.5 * (y_.row(n).transpose() - theta).squaredNorm() / (noise_sd_ * noise_sd_) -
           d * (kHalfLog2Pi + std::log(noise_sd_));
}

void ConjugateGaussianModel::add_grad_log_prior(const Vector& theta, Vector& grad) const {
    grad.array() -= (theta.array() - prior_mean_) / (prior_sd_ * prior_sd_);
}

void ConjugateGaussianModel::add_grad_point_log_likelihood(const Vector& theta, Index n,
                                                           double weight, Vector& grad) const {
    grad.noalias() += (weight / (noise_sd_ * noise_sd_)) * (y_.row(n).transpose() - theta);
}

Vector ConjugateGaussianModel::posterior_mean() const {
    const double n = static_cast<double>(y_.rows());
    const double precision = 1.0 / (prior_sd_ * prior_sd_) + n / (noise_sd_ * noise_sd_);
    Vector sum = y_.colwise().sum().transpose();
    return (sum.array() / (noise_sd_ * noise_sd_) + prior_mean_ / (prior_sd_ * prior_sd_)) /
           precision;
}

double ConjugateGaussianModel::posterior_sd() const {
    const double n = static_cast<double>(y_.rows());
    return 1.0 / std::sqrt(1.0 / (prior_sd_ * prior_sd_) + n / (noise_sd_ * noise_sd_));
}

double ConjugateGaussianModel::log_evidence() const {
    // Bayes' rule at the posterior mean: log p(D) = log p(D, t) - log p(t | D).
    const Vector t = posterior_mean();
    const double s = posterior_sd();
    const double log_post = -static_cast<double>(dim_) * (kHalfLog2Pi + std::log(s));
    return log_joint(t) - log_post;
}

// ---------------------------------------------------------------------------
// BnnRegressionModel

// Buffers reused across the draws of one evaluation.
struct BnnWorkspace {
    Matrix z;
    Matrix back;
    Matrix resid;
};

namespace {

struct BnnView {
    Eigen::Map<const RowMatrix> w1;
    Eigen::Map<const Vector> b1;
    Eigen::Map<const RowMatrix> w2;
    Eigen::Map<const Vector> b2;
};

BnnView view(const Vector& theta, Index p, Index h, Index q) {
    const double* d = theta.data();
    return {Eigen::Map<const RowMatrix>(d, h, p), Eigen::Map<const Vector>(d + h * p, h),
            Eigen::Map<const RowMatrix>(d + h * p + h, q, h),
            Eigen::Map<const Vector>(d + h * p + h + q * h, q)};
}

struct BnnGradView {
    Eigen::Map<RowMatrix> w1;
    Eigen::Map<Vector> b1;
    Eigen::Map<RowMatrix> w2;
    Eigen::Map<Vector> b2;
};

BnnGradView grad_view(Vector& g, Index p, Index h, Index q) {
    double* d = g.data();
    return {Eigen::Map<RowMatrix>(d, h, p), Eigen::Map<Vector>(d + h * p, h),
            Eigen::Map<RowMatrix>(d + h * p + h, q, h), Eigen::Map<Vector>(d + h * p + h + q * h, q)};
}

// tanh goes through the exponential, which Eigen vectorizes for doubles.
template <typename Derived>
Matrix activate(const Eigen::MatrixBase<Derived>& a, Activation act) {
    if (act == Activation::Tanh) return (1.0 - 2.0 / ((2.0 * a.array()).exp() + 1.0)).matrix();
    return a.array().max(0.0).matrix();
}

// Derivative of the activation expressed through its output z = act(a).
template <typename Derived>
Matrix activation_slope(const Eigen::MatrixBase<Derived>& z, Activation act) {
    if (act == Activation::Tanh) return (1.0 - z.array().square()).matrix();
    return (z.array() > 0.0).template cast<double>().matrix();
}

// Squared residual over the columns of xt. With `g`, also adds the gradient
// of g_scale times the Gaussian log likelihood's data term (per unit
// precision) to the weight views.
double bnn_squared_error(const BnnView& v, const Matrix& xt, const Matrix& yt, Activation act,
                         double g_scale, BnnGradView* g, BnnWorkspace& ws) {
    ws.z.resize(v.w1.rows(), xt.cols());
    ws.z.noalias() = v.w1 * xt;
    ws.z.colwise() += v.b1;
    if (act == Activation::Tanh)
        ws.z.array() = 1.0 - 2.0 / ((2.0 * ws.z.array()).exp() + 1.0);
    else
        ws.z.array() = ws.z.array().max(0.0);
    ws.resid = yt;
    ws.resid.colwise() -= v.b2;
    ws.resid.noalias() -= v.w2 * ws.z;
    const double sq = ws.resid.squaredNorm();
    if (!g) return sq;

    ws.resid *= g_scale;
    g->w2.noalias() += ws.resid * ws.z.transpose();
    g->b2 += ws.resid.rowwise().sum();
    ws.back.resize(ws.z.rows(), ws.z.cols());
    ws.back.noalias() = v.w2.transpose() * ws.resid;
    if (act == Activation::Tanh)
        ws.back.array() *= 1.0 - ws.z.array().square();
    else
        ws.back.array() *= (ws.z.array() > 0.0).cast<double>();
    g->w1.noalias() += ws.back * xt.transpose();
    g->b1 += ws.back.rowwise().sum();
    return sq;
}

}  // namespace

BnnRegressionModel::BnnRegressionModel(Dataset data, Index hidden_dim, Activation activation,
                                       NoiseModel noise)
    : data_(std::move(data)), hidden_(hidden_dim), activation_(activation), noise_(noise) {
    if (hidden_ < 1) throw InvalidConfig("BNN hidden_dim must be >= 1");
    if (data_.input_dim() < 1 || data_.target_dim() < 1)
        throw InvalidConfig("BNN needs at least one input and one target column");
    if (noise_.kind == NoiseModel::Kind::FixedSigma && !(noise_.sigma > 0.0))
        throw InvalidConfig("BNN noise sigma must be positive");
    if (noise_.kind == NoiseModel::Kind::GammaPrecision &&
        (!(noise_.gamma_shape > 0.0) || !(noise_.gamma_rate > 0.0)))
        throw InvalidConfig("Gamma precision prior needs positive shape and rate");
    latent_dim_ = latent_dim_for(data_.input_dim(), hidden_, data_.target_dim(), latent_precision());
}

double BnnRegressionModel::precision(const Vector& theta) const {
    if (latent_precision()) return softplus(theta(latent_dim_ - 1));
    return 1.0 / (noise_.sigma * noise_.sigma);
}

double BnnRegressionModel::noise_sd(const Vector& theta) const {
    return 1.0 / std::sqrt(precision(theta));
}

double BnnRegressionModel::log_prior(const Vector& theta) const {
    const Index w = weight_count();
    double lp = -0.5 * theta.head(w).squaredNorm() - static_cast<double>(w) * kHalfLog2Pi;
    if (latent_precision()) {
        const double u = theta(latent_dim_ - 1);
        const double tau = softplus(u);
        const double a = noise_.gamma_shape;
        const double b = noise_.gamma_rate;
        lp += a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(tau) - b * tau;
        // log |d tau / d u| = log sigmoid(u)
        lp += u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u));
    }
    return lp;
}

void BnnRegressionModel::add_grad_log_prior(const Vector& theta, Vector& grad) const {
    const Index w = weight_count();
    grad.head(w) -= theta.head(w);
    if (latent_precision()) {
        const double u = theta(latent_dim_ - 1);
        const double tau = softplus(u);
        const double s = sigmoid(u);
        const double a = noise_.gamma_shape;
        const double b = noise_.gamma_rate;
        grad(latent_dim_ - 1) += ((a - 1.0) / tau - b) * s + (1.0 - s);
    }
}

Vector BnnRegressionModel::predict_mean(const Vector& theta,
                                        const Eigen::Ref<const Vector>& x) const {
    const auto v = view(theta, data_.input_dim(), hidden_, data_.target_dim());
    const Vector a = v.w1 * x + v.b1;
    const Matrix z = activate(a, activation_);
    return v.w2 * z + v.b2;
}

Matrix BnnRegressionModel::predict_means(const Vector& theta, const Matrix& inputs) const {
    if (inputs.cols() != data_.input_dim()) throw InvalidInput("inputs have the wrong width");
    const auto v = view(theta, data_.input_dim(), hidden_, data_.target_dim());
    const Matrix a = (v.w1 * inputs.transpose()).colwise() + v.b1;
    const Matrix z = activate(a, activation_);
    return ((v.w2 * z).colwise() + v.b2).transpose();
}

double BnnRegressionModel::point_log_likelihood(const Vector& theta, Index n) const {
    const double tau = precision(theta);
    const Vector f = predict_mean(theta, data_.inputs.row(n).transpose());
    const double q = static_cast<double>(data_.target_dim());
    const double sq = (data_.targets.row(n).transpose() - f).squaredNorm();
    return q * (0.5 * std::log(tau) - kHalfLog2Pi) - 0.5 * tau * sq;
}

void BnnRegressionModel::add_grad_point_log_likelihood(const Vector& theta, Index n,
                                                       double weight, Vector& grad) const {
    const std::vector<Index> one{n};
    add_grad_log_likelihood_sum(theta, &one, weight, grad);
}

Matrix BnnRegressionModel::gather_inputs(const std::vector<Index>* indices) const {
    if (indices == nullptr) return data_.inputs.transpose();
    Matrix xt(data_.input_dim(), static_cast<Index>(indices->size()));
    for (std::size_t c = 0; c < indices->size(); ++c)
        xt.col(static_cast<Index>(c)) = data_.inputs.row((*indices)[c]).transpose();
    return xt;
}

Matrix BnnRegressionModel::gather_targets(const std::vector<Index>* indices) const {
    if (indices == nullptr) return data_.targets.transpose();
    Matrix yt(data_.target_dim(), static_cast<Index>(indices->size()));
    for (std::size_t c = 0; c < indices->size(); ++c)
        yt.col(static_cast<Index>(c)) = data_.targets.row((*indices)[c]).transpose();
    return yt;
}

double BnnRegressionModel::log_likelihood_sum(const Vector& theta,
                                              const std::vector<Index>* indices) const {
    const auto v = view(theta, data_.input_dim(), hidden_, data_.target_dim());
    const Matrix xt = gather_inputs(indices);
    const Matrix yt = gather_targets(indices);
    const double tau = precision(theta);
    BnnWorkspace ws;
    const double sq = bnn_squared_error(v, xt, yt, activation_, 0.0, nullptr, ws);
    const double count = static_cast<double>(yt.size());
    return count * (0.5 * std::log(tau) - kHalfLog2Pi) - 0.5 * tau * sq;
}

void BnnRegressionModel::add_grad_log_likelihood_sum(const Vector& theta,
                                                     const std::vector<Index>* indices,
                                                     double weight, Vector& grad) const {
    log_likelihood_sum_and_grad(theta, indices, weight, grad);
}

double BnnRegressionModel::log_likelihood_sum_and_grad(const Vector& theta,
                                                       const std::vector<Index>* indices,
                                                       double weight, Vector& grad) const {
    const Matrix xt = gather_inputs(indices);
    const Matrix yt = gather_targets(indices);
    BnnWorkspace ws;
    return likelihood_pass(theta, xt, yt, weight, &grad, ws);
}

double BnnRegressionModel::likelihood_pass(const Vector& theta, const Matrix& xt, const Matrix& yt,
                                           double weight, Vector* grad,
                                           BnnWorkspace& ws) const {
    const Index p = data_.input_dim();
    const Index q = data_.target_dim();
    const auto v = view(theta, p, hidden_, q);
    const double tau = precision(theta);
    const double count = static_cast<double>(yt.size());
    double sq = 0.0;
    if (grad) {
        // d loglik / d f = tau * (y - f).
        auto g = grad_view(*grad, p, hidden_, q);
        sq = bnn_squared_error(v, xt, yt, activation_, weight * tau, &g, ws);
        if (latent_precision()) {
            const double u = theta(latent_dim_ - 1);
            const double dtau = 0.5 * count / tau - 0.5 * sq;
            (*grad)(latent_dim_ - 1) += weight * dtau * sigmoid(u);
        }
    } else {
        sq = bnn_squared_error(v, xt, yt, activation_, 0.0, nullptr, ws);
    }
    return count * (0.5 * std::log(tau) - kHalfLog2Pi) - 0.5 * tau * sq;
}

void BnnRegressionModel::log_likelihood_rows(const Matrix& thetas,
                                             const std::vector<Index>* indices, double weight,
                                             Vector& sums, Matrix* grads) const {
    const Matrix xt = gather_inputs(indices);
    const Matrix yt = gather_targets(indices);
    BnnWorkspace ws;
    Vector theta(thetas.cols());
    Vector g(thetas.cols());
    sums.resize(thetas.rows());
    for (Index r = 0; r < thetas.rows(); ++r) {
        theta = thetas.row(r).transpose();
        if (grads) {
            g.setZero();
            sums(r) = likelihood_pass(theta, xt, yt, weight, &g, ws);
            grads->row(r) += g.transpose();
        } else {
            sums(r) = likelihood_pass(theta, xt, yt, weight, nullptr, ws);
        }
    }
}

// ---------------------------------------------------------------------------

MinibatchCheck minibatch_expectation_check(const LogJointModel& model, const Vector& theta,
                                           Index batch_size) {
    const Index n = model.data_size();
    if (batch_size < 1 || batch_size > n) throw InvalidInput("batch_size must lie in [1, N]");

    // C(n, k) with an enumeration cap; this is a test oracle.
    constexpr double kMaxSubsets = 1e6;
    double count = 1.0;
    for (Index i = 0; i < batch_size; ++i)
        count = count * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (count > kMaxSubsets) throw InvalidInput("too many subsets to enumerate");

    std::vector<char> mask(static_cast<std::size_t>(n), 0);
    std::fill(mask.begin(), mask.begin() + batch_size, 1);
    double sum = 0.0;
    std::size_t subsets = 0;
    do {
        std::vector<Index> idx;
        for (Index i = 0; i < n; ++i)
            if (mask[static_cast<std::size_t>(i)]) idx.push_back(i);
        sum += model.log_joint(theta, Batch::of(std::move(idx)));
        ++subsets;
    } while (std::prev_permutation(mask.begin(), mask.end()));

    return {sum / static_cast<double>(subsets), model.log_joint(theta, Batch::full()), subsets};
}

}  // namespace smi
