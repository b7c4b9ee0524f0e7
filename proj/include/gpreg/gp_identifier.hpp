#pragma once

// Streaming Gaussian-process identifier with a time-forgetting kernel.
//
// Training points live in a fixed-capacity shift register. Each sample stores
// the internal-model state, the observer's derivative estimate and the clock
// value at which it was admitted (the flow duration since the previous
// admission). The kernel multiplies a squared-exponential term in eta with an
// exponential decay in the elapsed time separating two points, so old samples
// are gradually forgotten.

#include <cstddef>
#include <deque>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace gpreg {

struct KernelParams {
  double sigma_p2 = 1.0;       // prior amplitude
  double sigma_n2 = 0.01;      // noise variance
  Eigen::VectorXd lambda_eta;  // per-dimension length scales
  double lambda_tau = 2.0;     // time scale [s]

  void validate() const;
  std::size_t input_dim() const { return static_cast<std::size_t>(lambda_eta.size()); }

  // Variance of a training point queried at its own location with no other
  // data nearby: sigma_p2 * sigma_n2 / (sigma_p2 + sigma_n2).
  double training_point_variance() const { return sigma_p2 * sigma_n2 / (sigma_p2 + sigma_n2); }
};

struct Sample {
  Eigen::VectorXd eta;
  Eigen::VectorXd xi2;
  double tau_at_jump = 0.0;
};

class SampleBuffer {
 public:
  explicit SampleBuffer(std::size_t capacity);

  // Appends the newest sample, evicting the oldest one when full.
  void push(Sample s);
  void push(const Eigen::VectorXd& eta, const Eigen::VectorXd& xi2, double tau);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // Total number of samples ever admitted (not saturated).
  std::size_t admitted() const { return admitted_; }

  const Sample& operator[](std::size_t i) const { return entries_[i]; }
  const std::deque<Sample>& entries() const { return entries_; }

  // Elapsed time between members i and j: sum of tau_at_jump over k in (min, max].
  double elapsed_between(std::size_t i, std::size_t j) const;
  // Age of member j seen from the current clock: tau + sum of newer tau_at_jump.
  double age(std::size_t j, double tau) const;

  std::size_t eta_dim() const;
  std::size_t output_dim() const;

 private:
  std::size_t capacity_;
  std::size_t admitted_ = 0;
  std::deque<Sample> entries_;  // oldest first
};

// A point the kernel can be evaluated at. Buffer members carry their index;
// queries carry the current clock instead.
struct KernelPoint {
  Eigen::VectorXd eta;
  std::optional<std::size_t> member;
  double tau = 0.0;

  static KernelPoint of_member(const SampleBuffer& buf, std::size_t j) {
    return {buf[j].eta, j, 0.0};
  }
  static KernelPoint query(Eigen::VectorXd eta, double tau) { return {std::move(eta), std::nullopt, tau}; }
};

// exp(-(a-b)^T Lambda^{-1} (a-b)) with Lambda = diag(2 lambda_i^2).
double spatial_correlation(const Eigen::Ref<const Eigen::VectorXd>& a,
                           const Eigen::Ref<const Eigen::VectorXd>& b, const KernelParams& params);

// exp(-dt / (2 lambda_tau^2)).
double temporal_correlation(double elapsed, const KernelParams& params);

double kernel_eval(const KernelPoint& a, const KernelPoint& b, const SampleBuffer& buffer,
                   const KernelParams& params);

// Immutable posterior over the samples admitted to a buffer snapshot.
// gamma = (K + sigma_n2 I)^{-1} is held as a Cholesky factor.
class GpPosterior {
 public:
  // output_dim fixes the shape of the prior when the buffer is still empty.
  static GpPosterior fit(const SampleBuffer& buffer, const KernelParams& params, std::size_t output_dim = 1);
  // Prior-only posterior for an empty buffer of the given shape.
  static GpPosterior prior(const KernelParams& params, std::size_t output_dim, std::size_t capacity);

  std::size_t size() const { return n_; }
  std::size_t output_dim() const { return output_dim_; }
  const KernelParams& params() const { return params_; }
  const SampleBuffer& buffer() const { return buffer_; }

  Eigen::VectorXd kernel_vector(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const;

  Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const;
  double variance(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const;

  // Rows 0..dim-1: d mu / d eta; last row: d mu / d tau. Columns: outputs.
  Eigen::MatrixXd mean_gradient(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const;
  // mean and mean_gradient from a single kernel evaluation.
  struct MeanWithGradient {
    Eigen::VectorXd mean;
    Eigen::MatrixXd gradient;
  };
  MeanWithGradient mean_with_gradient(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const;
  // Gradient of sigma^2 with respect to (eta, tau), length dim + 1.
  Eigen::VectorXd variance_gradient(const Eigen::Ref<const Eigen::VectorXd>& eta, double tau) const;

  Eigen::MatrixXd gram() const { return gram_; }
  Eigen::MatrixXd gamma() const;
  // Representer weights alpha = gamma * targets, n x output_dim.
  const Eigen::MatrixXd& weights() const { return alpha_; }
  const Eigen::MatrixXd& targets() const { return targets_; }

 private:
  GpPosterior(const KernelParams& params, SampleBuffer buffer);

  void check_query(const Eigen::Ref<const Eigen::VectorXd>& eta) const;

  KernelParams params_;
  SampleBuffer buffer_;
  std::size_t n_ = 0;
  std::size_t output_dim_ = 0;
  Eigen::MatrixXd etas_;         // n x dim
  Eigen::VectorXd inv_scale_;    // 1 / (2 lambda_i^2)
  Eigen::VectorXd time_weight_;  // exp(-newer_elapsed_j / (2 lambda_tau^2))
  Eigen::MatrixXd gram_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd targets_;
  Eigen::MatrixXd alpha_;
};

}  // namespace gpreg
