#pragma once

// Reference implementations used only by the tests. They follow the textbook
// formulas directly (dense matrices, full-pivoting LU, explicit loops) and
// share no code with the library beyond plain parameter structs.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gpreg/gp_identifier.hpp"

namespace oracle {

struct RawSample {
  Eigen::VectorXd eta;
  double target = 0.0;
  double tau = 0.0;  // clock value when admitted
};

struct Hyper {
  double sigma_p2 = 1.0;
  double sigma_n2 = 0.01;
  Eigen::VectorXd lambda_eta;
  double lambda_tau = 2.0;
};

inline double se(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Hyper& h) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double diff = a(i) - b(i);
    s += diff * diff / (2.0 * h.lambda_eta(i) * h.lambda_eta(i));
  }
  return std::exp(-s);
}

// Clock time at which each sample was admitted, taking the first admission as time zero.
inline std::vector<double> admission_times(const std::vector<RawSample>& data) {
  std::vector<double> t(data.size(), 0.0);
  for (std::size_t i = 1; i < data.size(); ++i) t[i] = t[i - 1] + data[i].tau;
  return t;
}

inline Eigen::MatrixXd dense_gram(const std::vector<RawSample>& data, const Hyper& h) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto t = admission_times(data);
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dt = std::abs(t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(j)]);
      K(i, j) = h.sigma_p2 * se(data[static_cast<std::size_t>(i)].eta, data[static_cast<std::size_t>(j)].eta, h) *
                std::exp(-dt / (2.0 * h.lambda_tau * h.lambda_tau));
    }
  }
  return K;
}

inline Eigen::VectorXd dense_kvec(const std::vector<RawSample>& data, const Hyper& h, const Eigen::VectorXd& eta,
                                  double tau) {
  const auto t = admission_times(data);
  const double now = data.empty() ? 0.0 : t.back() + tau;
  Eigen::VectorXd k(static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) {
    k(static_cast<Eigen::Index>(j)) =
        h.sigma_p2 * se(eta, data[j].eta, h) * std::exp(-(now - t[j]) / (2.0 * h.lambda_tau * h.lambda_tau));
  }
  return k;
}

inline Eigen::MatrixXd dense_gamma(const std::vector<RawSample>& data, const Hyper& h) {
  Eigen::MatrixXd A = dense_gram(data, h);
  A.diagonal().array() += h.sigma_n2;
  return A.fullPivLu().inverse();
}

inline double dense_mean(const std::vector<RawSample>& data, const Hyper& h, const Eigen::VectorXd& eta, double tau) {
  if (data.empty()) return 0.0;
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) y(static_cast<Eigen::Index>(j)) = data[j].target;
  Eigen::MatrixXd A = dense_gram(data, h);
  A.diagonal().array() += h.sigma_n2;
  return dense_kvec(data, h, eta, tau).dot(A.fullPivLu().solve(y));
}

inline double dense_variance(const std::vector<RawSample>& data, const Hyper& h, const Eigen::VectorXd& eta,
                             double tau) {
  if (data.empty()) return h.sigma_p2;
  Eigen::MatrixXd A = dense_gram(data, h);
  A.diagonal().array() += h.sigma_n2;
  const Eigen::VectorXd k = dense_kvec(data, h, eta, tau);
  return h.sigma_p2 - k.dot(A.fullPivLu().solve(k));
}

// Central finite difference of a scalar function along coordinate i.
inline double central_diff(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                           Eigen::Index i, double step) {
  Eigen::VectorXd xp = x;
  Eigen::VectorXd xm = x;
  xp(i) += step;
  xm(i) -= step;
  return (f(xp) - f(xm)) / (2.0 * step);
}

inline gpreg::KernelParams to_params(const Hyper& h) {
  gpreg::KernelParams p;
  p.sigma_p2 = h.sigma_p2;
  p.sigma_n2 = h.sigma_n2;
  p.lambda_eta = h.lambda_eta;
  p.lambda_tau = h.lambda_tau;
  return p;
}

inline gpreg::SampleBuffer to_buffer(const std::vector<RawSample>& data, std::size_t capacity) {
  gpreg::SampleBuffer buf(capacity);
  for (const auto& s : data) buf.push(s.eta, Eigen::VectorXd::Constant(1, s.target), s.tau);
  return buf;
}

// Random buffer at the reference kernel scale: eta spread over a few length scales, taus
// of a fraction of a second.
struct RandomCase {
  Hyper hyper;
  std::vector<RawSample> data;
  Eigen::VectorXd query;
  double tau = 0.0;
};

inline RandomCase random_case(std::mt19937_64& rng, std::size_t max_n, std::size_t dim = 2) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomCase c;
  c.hyper.sigma_p2 = 0.5 + unit(rng);
  c.hyper.sigma_n2 = 0.005 + 0.02 * unit(rng);
  c.hyper.lambda_eta.resize(static_cast<Eigen::Index>(dim));
  for (auto& l : c.hyper.lambda_eta) l = 0.05 + 0.15 * unit(rng);
  c.hyper.lambda_tau = 1.0 + 2.0 * unit(rng);
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_n)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    RawSample s;
    s.eta.resize(static_cast<Eigen::Index>(dim));
    for (auto& v : s.eta) v = -0.3 + 0.6 * unit(rng);
    s.target = -2.0 + 4.0 * unit(rng);
    s.tau = i == 0 ? 0.0 : 0.5 * unit(rng);
    c.data.push_back(s);
  }
  c.query.resize(static_cast<Eigen::Index>(dim));
  for (auto& v : c.query) v = -0.3 + 0.6 * unit(rng);
  c.tau = 0.5 * unit(rng);
  return c;
}

}  // namespace oracle
