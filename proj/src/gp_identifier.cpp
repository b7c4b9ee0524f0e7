#include "gpreg/gp_identifier.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gpreg {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

void KernelParams::validate() const {
  if (!(sigma_p2 > 0.0) || !(sigma_n2 > 0.0) || !(lambda_tau > 0.0)) {
    throw std::invalid_argument("kernel parameters sigma_p2, sigma_n2, lambda_tau must be positive");
  }
  if (lambda_eta.size() == 0) throw std::invalid_argument("kernel needs at least one length scale");
  if ((lambda_eta.array() <= 0.0).any() || !lambda_eta.allFinite()) {
    throw std::invalid_argument("kernel length scales must be positive");
  }
}

// ---------------------------------------------------------------------------
// SampleBuffer

SampleBuffer::SampleBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("sample buffer capacity must be positive");
}

void SampleBuffer::push(Sample s) {
  if (!all_finite(s.eta) || !all_finite(s.xi2) || !std::isfinite(s.tau_at_jump)) {
    throw std::invalid_argument("sample buffer rejects non-finite samples");
  }
  if (s.tau_at_jump < 0.0) throw std::invalid_argument("sample clock must be non-negative");
  if (!entries_.empty() &&
      (s.eta.size() != entries_.front().eta.size() || s.xi2.size() != entries_.front().xi2.size())) {
    throw std::invalid_argument("sample dimensions differ from buffer contents");
  }
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(s));
  ++admitted_;
}

void SampleBuffer::push(const Eigen::VectorXd& eta, const Eigen::VectorXd& xi2, double tau) {
  push(Sample{eta, xi2, tau});
}

double SampleBuffer::elapsed_between(std::size_t i, std::size_t j) const {
  if (i >= entries_.size() || j >= entries_.size()) throw std::out_of_range("buffer index");
  if (i > j) std::swap(i, j);
  double dt = 0.0;
  for (std::size_t k = i + 1; k <= j; ++k) dt += entries_[k].tau_at_jump;
  return dt;
}

double SampleBuffer::age(std::size_t j, double tau) const {
  if (j >= entries_.size()) throw std::out_of_range("buffer index");
  double dt = tau;
  for (std::size_t k = j + 1; k < entries_.size(); ++k) dt += entries_[k].tau_at_jump;
  return dt;
}

std::size_t SampleBuffer::eta_dim() const {
  return entries_.empty() ? 0 : static_cast<std::size_t>(entries_.front().eta.size());
}

std::size_t SampleBuffer::output_dim() const {
  return entries_.empty() ? 0 : static_cast<std::size_t>(entries_.front().xi2.size());
}

// ---------------------------------------------------------------------------
// Kernel

double spatial_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b, const KernelParams& params) {
  if (a.size() != b.size() || a.size() != params.lambda_eta.size()) {
    throw std::invalid_argument("kernel dimension mismatch: got " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()) + ", expected " +
                                std::to_string(params.lambda_eta.size()));
  }
  const Eigen::ArrayXd diff = (a - b).array();
  const Eigen::ArrayXd scale = 2.0 * params.lambda_eta.array().square();
  return std::exp(-(diff.square() / scale).sum());
}

double temporal_correlation(double elapsed, const KernelParams& params) {
  if (elapsed < 0.0 || std::isnan(elapsed)) {
    throw std::logic_error("negative elapsed time between kernel points (corrupted buffer)");
  }
  return std::exp(-elapsed / (2.0 * params.lambda_tau * params.lambda_tau));
}

double kernel_eval(const KernelPoint& a, const KernelPoint& b, const SampleBuffer& buffer,
                   const KernelParams& params) {
  const double spatial = spatial_correlation(a.eta, b.eta, params);
  double elapsed = 0.0;
  if (a.member && b.member) {
    elapsed = buffer.elapsed_between(*a.member, *b.member);
  } else if (a.member) {
    elapsed = buffer.age(*a.member, b.tau);
  } else if (b.member) {
    elapsed = buffer.age(*b.member, a.tau);
  } else {
    elapsed = std::abs(a.tau - b.tau);
  }
  return params.sigma_p2 * spatial * temporal_correlation(elapsed, params);
}

// ---------------------------------------------------------------------------
// GpPosterior

GpPosterior::GpPosterior(const KernelParams& params, SampleBuffer buffer)
    : params_(params), buffer_(std::move(buffer)) {}

GpPosterior GpPosterior::prior(const KernelParams& params, std::size_t output_dim, std::size_t capacity) {
  params.validate();
  GpPosterior post(params, SampleBuffer(capacity));
  post.output_dim_ = output_dim;
  post.inv_scale_ = (2.0 * params.lambda_eta.array().square()).inverse().matrix();
  post.etas_.resize(0, static_cast<Eigen::Index>(params.input_dim()));
  post.targets_.resize(0, static_cast<Eigen::Index>(output_dim));
  post.alpha_.resize(0, static_cast<Eigen::Index>(output_dim));
  return post;
}

GpPosterior GpPosterior::fit(const SampleBuffer& buffer, const KernelParams& params, std::size_t output_dim) {
  params.validate();
  if (buffer.empty()) return prior(params, output_dim, buffer.capacity());
  if (buffer.eta_dim() != params.input_dim()) {
    throw std::invalid_argument("buffer eta dimension does not match kernel length scales");
  }
  if (buffer.output_dim() != output_dim) {
    throw std::invalid_argument("buffer target dimension does not match requested output dimension");
  }

  GpPosterior post(params, buffer);
  const auto n = static_cast<Eigen::Index>(buffer.size());
  const auto dim = static_cast<Eigen::Index>(buffer.eta_dim());
  const auto out = static_cast<Eigen::Index>(buffer.output_dim());
  post.n_ = buffer.size();
  post.output_dim_ = buffer.output_dim();
  post.inv_scale_ = (2.0 * params.lambda_eta.array().square()).inverse().matrix();

  post.etas_.resize(n, dim);
  post.targets_.resize(n, out);
  for (Eigen::Index i = 0; i < n; ++i) {
    post.etas_.row(i) = buffer[static_cast<std::size_t>(i)].eta.transpose();
    post.targets_.row(i) = buffer[static_cast<std::size_t>(i)].xi2.transpose();
  }

  // newer[j] = sum of tau_at_jump of every sample admitted after j.
  Eigen::VectorXd newer(n);
  double acc = 0.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    newer(j) = acc;
    acc += buffer[static_cast<std::size_t>(j)].tau_at_jump;
  }
  const double time_scale = 2.0 * params.lambda_tau * params.lambda_tau;
  post.time_weight_ = (-newer.array() / time_scale).exp().matrix();

  post.gram_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    post.gram_(i, i) = params.sigma_p2;
    double elapsed = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      elapsed += buffer[static_cast<std::size_t>(j)].tau_at_jump;
      const double k = params.sigma_p2 * spatial_correlation(post.etas_.row(i).transpose(),
                                                             post.etas_.row(j).transpose(), params) *
                       temporal_correlation(elapsed, params);
      post.gram_(i, j) = k;
      post.gram_(j, i) = k;
    }
  }

  Eigen::MatrixXd regularized = post.gram_;
  regularized.diagonal().array() += params.sigma_n2;
  post.llt_.compute(regularized);
  if (post.llt_.info() != Eigen::Success) {
    throw std::runtime_error("internal error: Gram matrix factorization failed");
  }
  post.alpha_ = post.llt_.solve(post.targets_);
  return post;
}

void GpPosterior::check_query(const Eigen::Ref<const Eigen::VectorXd>& eta) const {
  if (static_cast<std::size_t>(eta.size()) != params_.input_dim()) {
    throw std::invalid_argument("query dimension " + std::to_string(eta.size()) + " does not match kernel dimension " +
                                std::to_string(params_.input_dim()));
  }
}

Eigen::VectorXd GpPosterior::kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const {
  check_query(eta);
  if (tau < 0.0) throw std::logic_error("negative clock in kernel query");
  const double decay = std::exp(-tau / (2.0 * params_.lambda_tau * params_.lambda_tau));
  Eigen::VectorXd k(static_cast<Eigen::Index>(n_));
  for (Eigen::Index j = 0; j < k.size(); ++j) {
    const double d2 = ((etas_.row(j).transpose() - eta).array().square() * inv_scale_.array()).sum();
    k(j) = params_.sigma_p2 * std::exp(-d2) * time_weight_(j) * decay;
  }
  return k;
}

Eigen::VectorXd GpPosterior::mean(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const {
  if (n_ == 0) {
    check_query(eta);
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(output_dim_));
  }
  return alpha_.transpose() * kernel_vector(eta, tau);
}

double GpPosterior::variance(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const {
  if (n_ == 0) {
    check_query(eta);
    return params_.sigma_p2;
  }
  const Eigen::VectorXd k = kernel_vector(eta, tau);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  return params_.sigma_p2 - v.squaredNorm();
}

Eigen::MatrixXd GpPosterior::mean_gradient(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const {
  return mean_with_gradient(eta, tau).gradient;
}

GpPosterior::MeanWithGradient GpPosterior::mean_with_gradient(const Eigen::Ref<const Eigen::VectorXd>& eta,
                                                               double tau) const {
  const auto dim = static_cast<Eigen::Index>(params_.input_dim());
  const auto outs = static_cast<Eigen::Index>(output_dim_);
  MeanWithGradient r{Eigen::VectorXd::Zero(outs), Eigen::MatrixXd::Zero(dim + 1, outs)};
  if (n_ == 0) {
    check_query(eta);
    return r;
  }
  const Eigen::VectorXd k = kernel_vector(eta, tau);
  const double time_rate = 1.0 / (2.0 * params_.lambda_tau * params_.lambda_tau);
  // d k_j / d eta = -2 Lambda^{-1} (eta - eta_j) k_j ; d k_j / d tau = -k_j / (2 lambda_tau^2)
  const Eigen::MatrixXd weighted = k.asDiagonal() * alpha_;  // n x outs
  r.mean = weighted.colwise().sum().transpose();
  r.gradient.topRows(dim) = -2.0 * inv_scale_.asDiagonal() *
                            (eta * r.mean.transpose() - etas_.transpose() * weighted);
  r.gradient.row(dim) = -time_rate * r.mean.transpose();
  return r;
}

Eigen::VectorXd GpPosterior::variance_gradient(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const {
  const auto dim = static_cast<Eigen::Index>(params_.input_dim());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim + 1);
  if (n_ == 0) {
    check_query(eta);
    return grad;
  }
  const Eigen::VectorXd k = kernel_vector(eta, tau);
  const Eigen::VectorXd gk = llt_.solve(k);
  const double time_rate = 1.0 / (2.0 * params_.lambda_tau * params_.lambda_tau);
  // kappa(z, z) is constant, so d sigma^2 = -2 (dk)^T gamma k.
  const Eigen::VectorXd weighted = k.cwiseProduct(gk);
  const double total = weighted.sum();
  grad.head(dim) = 4.0 * inv_scale_.cwiseProduct(eta * total - etas_.transpose() * weighted);
  grad(dim) = 2.0 * time_rate * total;
  return grad;
}

Eigen::MatrixXd GpPosterior::gamma() const {
  if (n_ == 0) return Eigen::MatrixXd(0, 0);
  return llt_.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_)));
}

}  // namespace gpreg
