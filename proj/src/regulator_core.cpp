#include "gpreg/regulator_core.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace gpreg {

void StructureParams::validate() const {
  if (n_e == 0 || d == 0 || n_u == 0) throw std::invalid_argument("structure dimensions must be positive");
  if (n_u < n_e) throw std::invalid_argument("structure requires n_u >= n_e");
  if (n_chi.size() != n_e) throw std::invalid_argument("need one chain length per regulation error");
  for (auto n : n_chi) {
    if (n == 0) throw std::invalid_argument("chain lengths must be positive");
  }
}

std::size_t StructureParams::chi_dim() const { return std::accumulate(n_chi.begin(), n_chi.end(), std::size_t{0}); }

void InternalModelParams::validate() const {
  if (!(g > 0.0)) throw std::invalid_argument("internal model gain g must be positive");
  if (h.size() == 0) throw std::invalid_argument("internal model needs at least one coefficient");
  if (!is_hurwitz(h)) throw std::invalid_argument("internal model coefficients h are not Hurwitz");
}

void StabilizerParams::validate(const StructureParams& s) const {
  if (!(l > 0.0) || !(delta > 0.0)) throw std::invalid_argument("stabilizer gains l and delta must be positive");
  if (c.size() != s.n_e) throw std::invalid_argument("stabilizer needs one coefficient set per chain");
  for (std::size_t i = 0; i < s.n_e; ++i) {
    if (static_cast<std::size_t>(c[i].size()) != s.n_chi[i]) {
      throw std::invalid_argument("stabilizer coefficient count must equal chain length");
    }
    // s^n + c_n s^{n-1} + ... + c_1
    if (!is_hurwitz(c[i].reverse())) throw std::invalid_argument("stabilizer coefficients c are not Hurwitz");
  }
  if (L.rows() != static_cast<Eigen::Index>(s.n_u) || L.cols() != static_cast<Eigen::Index>(s.n_e)) {
    throw std::invalid_argument("stabilizer matrix L must be n_u x n_e");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(L);
  if (lu.rank() != static_cast<Eigen::Index>(s.n_e)) throw std::invalid_argument("stabilizer matrix L must be full rank");
  if (K_w.size() != 0 && K_w.rows() != static_cast<Eigen::Index>(s.n_e)) {
    throw std::invalid_argument("feedforward gain K_w must have n_e rows");
  }
}

void ObserverParams::validate() const {
  if (!(m1 > 0.0) || !(m2 > 0.0) || !(rho > 0.0)) throw std::invalid_argument("observer gains must be positive");
}

StructureMatrices build_F_H_C(const StructureParams& s) {
  s.validate();
  const auto n = static_cast<Eigen::Index>(s.chi_dim());
  const auto ne = static_cast<Eigen::Index>(s.n_e);
  StructureMatrices m{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, ne), Eigen::MatrixXd::Zero(ne, n)};
  Eigen::Index offset = 0;
  for (Eigen::Index i = 0; i < ne; ++i) {
    const auto ni = static_cast<Eigen::Index>(s.n_chi[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k + 1 < ni; ++k) m.F(offset + k, offset + k + 1) = 1.0;
    m.H(offset + ni - 1, i) = 1.0;
    m.C(i, offset) = 1.0;
    offset += ni;
  }
  return m;
}

bool is_hurwitz(const Eigen::VectorXd& a) {
  const auto n = a.size();
  if (n == 0) return true;
  if (!a.allFinite()) return false;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  companion.topRightCorner(n - 1, n - 1).setIdentity();
  companion.bottomRows(1) = -a.reverse().transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  return (es.eigenvalues().real().array() < 0.0).all();
}

Eigen::VectorXd internal_model_flow(const Eigen::VectorXd& eta, const Eigen::VectorXd& e,
                                    const Eigen::VectorXd& mu_value, const InternalModelParams& params) {
  const auto ne = e.size();
  const auto d = params.h.size();
  if (ne == 0 || eta.size() != d * ne || mu_value.size() != ne) {
    throw std::invalid_argument("internal_model_flow: dimension mismatch");
  }
  Eigen::VectorXd rate(eta.size());
  double gain = 1.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    gain *= params.g;
    const auto drift = (i + 1 < d) ? Eigen::VectorXd(eta.segment((i + 1) * ne, ne)) : mu_value;
    rate.segment(i * ne, ne) = drift + gain * params.h(i) * e;
  }
  return rate;
}

ObserverRates observer_flow(const Eigen::VectorXd& xi1, const Eigen::VectorXd& xi2, const Eigen::VectorXd& eta_d,
                            const Eigen::VectorXd& mu_dot, const ObserverParams& params) {
  if (xi1.size() != xi2.size() || xi1.size() != eta_d.size() || xi1.size() != mu_dot.size()) {
    throw std::invalid_argument("observer_flow: dimension mismatch");
  }
  const Eigen::VectorXd innovation = xi1 - eta_d;
  return {xi2 - params.m1 * params.rho * innovation, mu_dot - params.m2 * params.rho * params.rho * innovation};
}

Eigen::VectorXd mu_total_derivative(const GpPosterior& post, const Eigen::VectorXd& eta, double tau,
                                    const Eigen::VectorXd& eta_dot) {
  if (post.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(post.output_dim()));
  const Eigen::MatrixXd grad = post.mean_gradient(eta, tau);
  const auto dim = eta.size();
  return grad.topRows(dim).transpose() * eta_dot + grad.row(dim).transpose();
}

Eigen::VectorXd mu_total_derivative(const GpPosterior& post, const Eigen::VectorXd& eta, double tau,
                                    const Eigen::VectorXd& e, const Eigen::VectorXd& mu_value,
                                    const InternalModelParams& params) {
  return mu_total_derivative(post, eta, tau, internal_model_flow(eta, e, mu_value, params));
}

Eigen::MatrixXd stabilizer_gain(const StructureParams& s, const StabilizerParams& stab) {
  const auto n = static_cast<Eigen::Index>(s.chi_dim());
  const auto ne = static_cast<Eigen::Index>(s.n_e);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(ne, n);
  Eigen::Index offset = 0;
  for (Eigen::Index i = 0; i < ne; ++i) {
    const auto& ci = stab.c[static_cast<std::size_t>(i)];
    const auto ni = ci.size();
    for (Eigen::Index j = 0; j < ni; ++j) {
      K(i, offset + j) = -ci(j) * std::pow(stab.delta, static_cast<double>(ni - j));
    }
    offset += ni;
  }
  return K;
}

StabilizerGains stabilizer_gains(const StructureParams& s, const StabilizerParams& stab) {
  const Eigen::MatrixXd K = stabilizer_gain(s, stab);
  const auto C = build_F_H_C(s).C;
  const auto ne = static_cast<Eigen::Index>(s.n_e);
  return {stab.l * K, -stab.l * Eigen::MatrixXd::Identity(ne, ne), stab.l * K * C.transpose()};
}

Eigen::VectorXd control_action(const Eigen::VectorXd& chi, const Eigen::VectorXd& zeta, const Eigen::VectorXd& eta1,
                               const StructureParams& s, const StabilizerParams& stab, const Eigen::VectorXd& nu) {
  const auto gains = stabilizer_gains(s, stab);
  if (chi.size() != gains.K_chi.cols() || zeta.size() != gains.K_zeta.cols() || eta1.size() != gains.K_eta.cols()) {
    throw std::invalid_argument("control_action: dimension mismatch");
  }
  Eigen::VectorXd inner = gains.K_chi * chi + gains.K_zeta * zeta + gains.K_eta * eta1;
  if (nu.size() != 0) {
    if (stab.K_w.cols() != nu.size()) throw std::invalid_argument("control_action: feedforward dimension mismatch");
    inner += stab.K_w * nu;
  }
  return stab.L * inner;
}

BaselineIdentifier BaselineIdentifier::init(std::size_t regressor_dim, std::size_t output_dim, double p0,
                                            double forgetting) {
  if (!(p0 > 0.0)) throw std::invalid_argument("RLS initial covariance must be positive");
  if (!(forgetting > 0.0 && forgetting <= 1.0)) throw std::invalid_argument("RLS forgetting factor must be in (0, 1]");
  const auto n = static_cast<Eigen::Index>(regressor_dim);
  return {Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(output_dim)), p0 * Eigen::MatrixXd::Identity(n, n),
          forgetting};
}

BaselineIdentifier baseline_step(const BaselineIdentifier& ident, const Eigen::VectorXd& eta,
                                 const Eigen::VectorXd& xi2) {
  if (eta.size() != ident.theta.rows() || xi2.size() != ident.theta.cols()) {
    throw std::invalid_argument("baseline_step: dimension mismatch");
  }
  BaselineIdentifier next = ident;
  const Eigen::VectorXd Pphi = ident.P * eta;
  const double denom = ident.forgetting + eta.dot(Pphi);
  const Eigen::VectorXd gain = Pphi / denom;
  const Eigen::VectorXd residual = xi2 - ident.theta.transpose() * eta;
  next.theta += gain * residual.transpose();
  next.P = (ident.P - gain * Pphi.transpose()) / ident.forgetting;
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  return next;
}

SigmaCondition check_sigma_condition(const KernelParams& params, double sigma_thr2) {
  SigmaCondition r;
  r.lower = params.training_point_variance();
  r.upper = params.sigma_p2;
  r.ok = r.lower < sigma_thr2 && sigma_thr2 < r.upper;
  return r;
}

}  // namespace gpreg
