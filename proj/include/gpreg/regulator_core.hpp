#pragma once

// Building blocks of the internal-model regulator: chain-of-integrators
// structure matrices, the post-processing internal model, the high-gain
// derivative observer, the static stabilizer, and a linearly parametrized
// RLS identifier used as the comparison baseline.

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "gpreg/gp_identifier.hpp"

namespace gpreg {

struct StructureParams {
  std::size_t n_e = 1;
  std::vector<std::size_t> n_chi{3};
  std::size_t d = 2;
  std::size_t n_u = 1;

  void validate() const;
  std::size_t chi_dim() const;
};

struct InternalModelParams {
  double g = 2.0;
  Eigen::VectorXd h;  // h_1 .. h_d

  void validate() const;
};

struct StabilizerParams {
  double l = 1.0;
  double delta = 1.0;
  std::vector<Eigen::VectorXd> c;  // per chain: c_1 .. c_{n_chi^i}
  Eigen::MatrixXd L;               // n_u x n_e
  Eigen::MatrixXd K_w;             // n_e x n_nu, may be empty

  void validate(const StructureParams& s) const;
};

struct ObserverParams {
  double m1 = 20.0;
  double m2 = 20.0;
  double rho = 2.0;

  void validate() const;
};

struct StructureMatrices {
  Eigen::MatrixXd F;
  Eigen::MatrixXd H;
  Eigen::MatrixXd C;
};

StructureMatrices build_F_H_C(const StructureParams& s);

// Companion-matrix test for s^n + a_1 s^{n-1} + ... + a_n.
bool is_hurwitz(const Eigen::VectorXd& descending_coeffs);

// eta_dot for the chain  eta_i' = eta_{i+1} + g^i h_i e,  eta_d' = mu + g^d h_d e.
// eta is stacked in blocks of n_e.
Eigen::VectorXd internal_model_flow(const Eigen::VectorXd& eta, const Eigen::VectorXd& e,
                                    const Eigen::VectorXd& mu_value, const InternalModelParams& params);

struct ObserverRates {
  Eigen::VectorXd xi1_dot;
  Eigen::VectorXd xi2_dot;
};

ObserverRates observer_flow(const Eigen::VectorXd& xi1, const Eigen::VectorXd& xi2, const Eigen::VectorXd& eta_d,
                            const Eigen::VectorXd& mu_dot, const ObserverParams& params);

// Total time derivative of mu along the internal-model flow with tau' = 1.
Eigen::VectorXd mu_total_derivative(const GpPosterior& post, const Eigen::VectorXd& eta, double tau,
                                    const Eigen::VectorXd& e, const Eigen::VectorXd& mu_value,
                                    const InternalModelParams& params);
// Same, with eta_dot supplied by the caller.
Eigen::VectorXd mu_total_derivative(const GpPosterior& post, const Eigen::VectorXd& eta, double tau,
                                    const Eigen::VectorXd& eta_dot);

// K(delta) = blkdiag(K^i), K^i = -(c_1 delta^n, c_2 delta^{n-1}, ..., c_n delta).
Eigen::MatrixXd stabilizer_gain(const StructureParams& s, const StabilizerParams& stab);

struct StabilizerGains {
  Eigen::MatrixXd K_chi;
  Eigen::MatrixXd K_zeta;
  Eigen::MatrixXd K_eta;
};

StabilizerGains stabilizer_gains(const StructureParams& s, const StabilizerParams& stab);

// u = L (K_chi chi + K_zeta zeta + K_eta eta1 + K_w nu). nu may be empty.
Eigen::VectorXd control_action(const Eigen::VectorXd& chi, const Eigen::VectorXd& zeta, const Eigen::VectorXd& eta1,
                               const StructureParams& s, const StabilizerParams& stab,
                               const Eigen::VectorXd& nu = Eigen::VectorXd());

// Linear-in-eta identifier psi(eta) = theta^T eta, trained by recursive least
// squares with exponential forgetting.
struct BaselineIdentifier {
  Eigen::MatrixXd theta;  // (d n_e) x n_e
  Eigen::MatrixXd P;      // (d n_e) x (d n_e)
  double forgetting = 1.0;

  static BaselineIdentifier init(std::size_t regressor_dim, std::size_t output_dim, double p0, double forgetting);
  Eigen::VectorXd predict(const Eigen::VectorXd& eta) const { return theta.transpose() * eta; }
};

BaselineIdentifier baseline_step(const BaselineIdentifier& ident, const Eigen::VectorXd& eta,
                                 const Eigen::VectorXd& xi2);

struct SigmaCondition {
  bool ok = false;
  double lower = 0.0;  // sigma_p2 sigma_n2 / (sigma_p2 + sigma_n2)
  double upper = 0.0;  // sigma_p2
};

// Open-interval check lower < sigma_thr2 < upper guaranteeing dwell and
// reverse dwell times for the event-triggered sampling.
SigmaCondition check_sigma_condition(const KernelParams& params, double sigma_thr2);

}  // namespace gpreg
