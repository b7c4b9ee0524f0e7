#include "gpreg/vtol_testbed.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gpreg {

namespace {

// d(w) = (kWind1 w1 + kWind3 w3) / M
constexpr double kWind1 = 2e7;
constexpr double kWind3 = 1e6;

double exo_w2_rate(double w1, Exosystem variant) {
  switch (variant) {
    case Exosystem::linear:
      return -w1;
    case Exosystem::duffing:
      return 4.0 * w1 - w1 * w1 * w1;
    case Exosystem::arctan:
      return 3.0 * std::atan(w1) - w1;
  }
  throw std::invalid_argument("unknown exosystem");
}

void check_attitude(double theta1) {
  if (!(std::abs(theta1) < std::numbers::pi / 2)) {
    throw std::domain_error("VTOL roll angle at or beyond +-pi/2 (tan/cos singularity)");
  }
}

}  // namespace

void VtolParams::validate() const {
  if (!(M > 0.0) || !(J > 0.0) || !(wing_l > 0.0) || !(grav > 0.0)) {
    throw std::invalid_argument("VTOL parameters M, J, wing_l, grav must be positive");
  }
}

std::string_view to_string(Exosystem e) {
  switch (e) {
    case Exosystem::linear:
      return "linear";
    case Exosystem::duffing:
      return "duffing";
    case Exosystem::arctan:
      return "arctan";
  }
  return "unknown";
}

Exosystem exosystem_from_string(std::string_view s) {
  if (s == "linear") return Exosystem::linear;
  if (s == "duffing") return Exosystem::duffing;
  if (s == "arctan") return Exosystem::arctan;
  throw std::invalid_argument("unknown exosystem '" + std::string(s) + "' (expected linear, duffing or arctan)");
}

ExoState exo_flow(const ExoState& w, Exosystem variant) {
  return {w(1), exo_w2_rate(w(0), variant), w(3), -4.0 * w(2)};
}

Disturbance disturbance(const ExoState& w, Exosystem variant, const VtolParams& params) {
  const ExoState wd = exo_flow(w, variant);
  Disturbance r;
  r.d = (kWind1 * w(0) + kWind3 * w(2)) / params.M;
  r.Ls_d = (kWind1 * wd(0) + kWind3 * wd(2)) / params.M;
  r.Ls2_d = (kWind1 * wd(1) + kWind3 * wd(3)) / params.M;
  return r;
}

TransformedState to_transformed(const RawState& raw, const Disturbance& dist, const VtolParams& params) {
  check_attitude(raw.theta1);
  const double c = std::cos(raw.theta1);
  TransformedState x;
  x.chi = {raw.y1, raw.y2, dist.d - params.grav * std::tan(raw.theta1)};
  x.zeta = dist.Ls_d - params.grav * raw.theta2 / (c * c);
  return x;
}

RawState to_raw(const TransformedState& x, const Disturbance& dist, const VtolParams& params) {
  const double ratio = (dist.d - x.chi(2)) / params.grav;
  const double cos2 = 1.0 / (1.0 + ratio * ratio);
  return {x.chi(0), x.chi(1), std::atan(ratio), (dist.Ls_d - x.zeta) * cos2 / params.grav};
}

double plant_q(const TransformedState& x, const Disturbance& dist, const VtolParams& params) {
  const double ratio = (dist.d - x.chi(2)) / params.grav;
  const double sin2 = 2.0 * ratio / (1.0 + ratio * ratio);  // sin(2 atan(ratio))
  const double rate = dist.Ls_d - x.zeta;
  return dist.Ls2_d - rate * rate * sin2 / params.grav;
}

double plant_omega(const TransformedState& x, const Disturbance& dist, const VtolParams& params) {
  const double ratio = (dist.d - x.chi(2)) / params.grav;
  return -params.grav * params.input_gain() * (1.0 + ratio * ratio);  // cos(atan(ratio))^-2
}

Eigen::Vector4d transformed_flow(const TransformedState& x, const Disturbance& dist, double u,
                                 const VtolParams& params) {
  return {x.chi(1), x.chi(2), x.zeta, plant_q(x, dist, params) + plant_omega(x, dist, params) * u};
}

Eigen::Vector4d vtol_raw_flow(const RawState& raw, const Disturbance& dist, double u, const VtolParams& params) {
  check_attitude(raw.theta1);
  return {raw.y2, dist.d - params.grav * std::tan(raw.theta1), raw.theta2, params.input_gain() * u};
}

double vtol_control_law(const RawState& raw, double eta1, const StabilizerParams& stab, double gain_L,
                        const VtolParams& params) {
  check_attitude(raw.theta1);
  const auto& c = stab.c.at(0);
  if (c.size() != 3) throw std::invalid_argument("VTOL control law needs three chain coefficients");
  const double l = stab.l;
  const double dl = stab.delta;
  const double cth = std::cos(raw.theta1);
  return gain_L * (c(0) * l * dl * dl * dl * (raw.y1 + eta1) + c(1) * l * dl * dl * raw.y2 +
                   c(2) * l * dl * (-params.grav * std::tan(raw.theta1)) +
                   l * (-params.grav * raw.theta2 / (cth * cth)));
}

double vtol_control_law(const TransformedState& x, const Disturbance& dist, double eta1,
                        const StabilizerParams& stab, double gain_L) {
  const auto& c = stab.c.at(0);
  if (c.size() != 3) throw std::invalid_argument("VTOL control law needs three chain coefficients");
  const double l = stab.l;
  const double dl = stab.delta;
  // -g tan(theta1) = chi3 - d,  -g theta2 / cos^2(theta1) = zeta - L_s d
  return gain_L * l *
         (c(0) * dl * dl * dl * (x.chi(0) + eta1) + c(1) * dl * dl * x.chi(1) + c(2) * dl * (x.chi(2) - dist.d) +
          (x.zeta - dist.Ls_d));
}

double ideal_friend(const ExoState& w, Exosystem variant, const VtolParams& params) {
  const Disturbance dist = disturbance(w, variant, params);
  const double g = params.grav;
  const double s = g * g + dist.d * dist.d;
  return g * (dist.Ls2_d - 2.0 * dist.d * dist.Ls_d * dist.Ls_d / s) / (params.input_gain() * s);
}

// ---------------------------------------------------------------------------
// Closed loop

std::string_view to_string(RegulatorKind k) { return k == RegulatorKind::gp ? "gp" : "baseline"; }

void ClosedLoopParams::validate(RegulatorKind kind) const {
  plant.validate();
  internal_model.validate();
  observer.validate();
  StructureParams s;
  s.d = model_order();
  stabilizer.validate(s);
  if (stabilizer.c.at(0).size() != 3) throw std::invalid_argument("VTOL chain has length 3");
  if (kind == RegulatorKind::gp) {
    kernel.validate();
    if (kernel.input_dim() != model_order()) {
      throw std::invalid_argument("gp lambda_eta needs one length scale per internal-model state");
    }
    if (n_ds == 0) throw std::invalid_argument("gp n_ds must be positive");
    const auto cond = check_sigma_condition(kernel, sigma_thr2);
    if (!cond.ok) {
      throw std::invalid_argument("sigma_thr2 = " + std::to_string(sigma_thr2) +
                                  " violates the dwell-time condition " + std::to_string(cond.lower) +
                                  " < sigma_thr2 < " + std::to_string(cond.upper));
    }
  } else {
    if (!(baseline.p0 > 0.0) || !(baseline.forgetting_rate >= 0.0)) {
      throw std::invalid_argument("baseline p0 must be positive and forgetting_rate non-negative");
    }
  }
}

struct ClosedLoop::Parts {
  ExoState w;
  TransformedState plant;
  Eigen::VectorXd eta;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double tau = 0.0;
  Eigen::VectorXd theta;
  Eigen::MatrixXd P;
};

ClosedLoop::ClosedLoop(ClosedLoopParams params, RegulatorKind kind)
    : params_(std::move(params)), kind_(kind), buffer_(params_.n_ds == 0 ? 1 : params_.n_ds) {
  params_.validate(kind_);
  layout_.d = params_.model_order();
  layout_.baseline = kind_ == RegulatorKind::baseline;
  structure_.d = layout_.d;
  if (kind_ == RegulatorKind::gp) posterior_ = std::make_shared<GpPosterior>(GpPosterior::fit(buffer_, params_.kernel, 1));
}

State ClosedLoop::initial_state(const InitialConditions& ic) {
  const auto d = static_cast<Eigen::Index>(layout_.d);
  State x = State::Zero(static_cast<Eigen::Index>(layout_.size()));
  x.segment<4>(LoopLayout::w) = ic.w0;
  x.segment<3>(LoopLayout::chi) = ic.chi0;
  x(LoopLayout::zeta) = ic.zeta0;
  if (ic.eta0.size() != 0) {
    if (ic.eta0.size() != d) throw std::invalid_argument("initial eta has the wrong dimension");
    x.segment(LoopLayout::eta, d) = ic.eta0;
  }
  x(static_cast<Eigen::Index>(layout_.xi1())) = ic.xi1_0;
  x(static_cast<Eigen::Index>(layout_.xi2())) = ic.xi2_0;
  if (kind_ == RegulatorKind::baseline) {
    Eigen::Map<Eigen::MatrixXd>(x.data() + layout_.P(), d, d) = params_.baseline.p0 * Eigen::MatrixXd::Identity(d, d);
  } else {
    buffer_ = SampleBuffer(params_.n_ds);
    posterior_ = std::make_shared<GpPosterior>(GpPosterior::fit(buffer_, params_.kernel, 1));
  }
  return x;
}

ClosedLoop::Parts ClosedLoop::unpack(const State& x) const {
  const auto d = static_cast<Eigen::Index>(layout_.d);
  Parts p;
  p.w = x.segment<4>(LoopLayout::w);
  p.plant.chi = x.segment<3>(LoopLayout::chi);
  p.plant.zeta = x(LoopLayout::zeta);
  p.eta = x.segment(LoopLayout::eta, d);
  p.xi1 = x(static_cast<Eigen::Index>(layout_.xi1()));
  p.xi2 = x(static_cast<Eigen::Index>(layout_.xi2()));
  p.tau = x(static_cast<Eigen::Index>(layout_.tau()));
  if (layout_.baseline) {
    p.theta = x.segment(static_cast<Eigen::Index>(layout_.theta()), d);
    p.P = Eigen::Map<const Eigen::MatrixXd>(x.data() + layout_.P(), d, d);
  }
  return p;
}

double ClosedLoop::control(const State& x) const {
  const Parts p = unpack(x);
  const Disturbance dist = disturbance(p.w, params_.exosystem, params_.plant);
  // The VTOL law carries the opposite sign convention for L.
  return vtol_control_law(p.plant, dist, p.eta(0), params_.stabilizer, -params_.stabilizer.L(0, 0));
}

State ClosedLoop::flow(double /*t*/, const State& x) const {
  const auto d = static_cast<Eigen::Index>(layout_.d);
  const Parts p = unpack(x);
  const Disturbance dist = disturbance(p.w, params_.exosystem, params_.plant);
  const double u = vtol_control_law(p.plant, dist, p.eta(0), params_.stabilizer, -params_.stabilizer.L(0, 0));
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(1, p.plant.chi(0));

  State dx(x.size());
  dx.segment<4>(LoopLayout::w) = exo_flow(p.w, params_.exosystem);
  dx.segment<4>(LoopLayout::chi) = transformed_flow(p.plant, dist, u, params_.plant);

  Eigen::VectorXd mu(1);
  Eigen::VectorXd eta_dot;
  Eigen::VectorXd mu_dot(1);
  if (kind_ == RegulatorKind::gp) {
    const auto fit = posterior_->mean_with_gradient(p.eta, p.tau);
    mu = fit.mean;
    eta_dot = internal_model_flow(p.eta, e, mu, params_.internal_model);
    mu_dot = fit.gradient.topRows(d).transpose() * eta_dot + fit.gradient.row(d).transpose();
    dx(static_cast<Eigen::Index>(layout_.tau())) = 1.0;
  } else {
    mu(0) = p.theta.dot(p.eta);
    eta_dot = internal_model_flow(p.eta, e, mu, params_.internal_model);
    // Normalized continuous-time least squares with exponential forgetting.
    const double norm2 = 1.0 + p.eta.squaredNorm();
    const Eigen::VectorXd Peta = p.P * p.eta;
    const double residual = p.xi2 - mu(0);
    const Eigen::VectorXd theta_dot = Peta * residual / norm2;
    Eigen::MatrixXd P_dot = params_.baseline.forgetting_rate * p.P - Peta * Peta.transpose() / norm2;
    mu_dot(0) = theta_dot.dot(p.eta) + p.theta.dot(eta_dot);
    dx(static_cast<Eigen::Index>(layout_.tau())) = 1.0;
    dx.segment(static_cast<Eigen::Index>(layout_.theta()), d) = theta_dot;
    Eigen::Map<Eigen::MatrixXd>(dx.data() + layout_.P(), d, d) = P_dot;
  }
  dx.segment(LoopLayout::eta, d) = eta_dot;

  const auto obs = observer_flow(Eigen::VectorXd::Constant(1, p.xi1), Eigen::VectorXd::Constant(1, p.xi2),
                                 p.eta.tail(1), mu_dot, params_.observer);
  dx(static_cast<Eigen::Index>(layout_.xi1())) = obs.xi1_dot(0);
  dx(static_cast<Eigen::Index>(layout_.xi2())) = obs.xi2_dot(0);
  return dx;
}

State ClosedLoop::jump(const State& x) {
  if (kind_ != RegulatorKind::gp) throw std::logic_error("the baseline regulator has no jumps");
  const Parts p = unpack(x);
  buffer_.push(p.eta, Eigen::VectorXd::Constant(1, p.xi2), p.tau);
  posterior_ = std::make_shared<GpPosterior>(GpPosterior::fit(buffer_, params_.kernel, 1));
  State next = x;
  next(static_cast<Eigen::Index>(layout_.tau())) = 0.0;
  return next;
}

double ClosedLoop::sigma2(const State& x) const {
  if (kind_ != RegulatorKind::gp) return std::numeric_limits<double>::quiet_NaN();
  const auto d = static_cast<Eigen::Index>(layout_.d);
  return posterior_->variance(x.segment(LoopLayout::eta, d), x(static_cast<Eigen::Index>(layout_.tau())));
}

double ClosedLoop::sigma2_rate(const State& x) const {
  if (kind_ != RegulatorKind::gp) return 0.0;
  const auto d = static_cast<Eigen::Index>(layout_.d);
  const Eigen::VectorXd eta = x.segment(LoopLayout::eta, d);
  const double tau = x(static_cast<Eigen::Index>(layout_.tau()));
  const Eigen::VectorXd e = Eigen::VectorXd::Constant(1, x(LoopLayout::chi));
  Eigen::VectorXd zdot(d + 1);
  zdot << internal_model_flow(eta, e, posterior_->mean(eta, tau), params_.internal_model), 1.0;
  return posterior_->variance_gradient(eta, tau).dot(zdot);
}

Eigen::VectorXd ClosedLoop::outputs(const State& x) const {
  const ExoState w = x.segment<4>(LoopLayout::w);
  Eigen::VectorXd y(LoopOutputs::count);
  y(LoopOutputs::e) = x(LoopLayout::chi);
  y(LoopOutputs::sigma2) = sigma2(x);
  y(LoopOutputs::u) = control(x);
  y(LoopOutputs::d_w) = disturbance(w, params_.exosystem, params_.plant).d;
  y(LoopOutputs::buffer_len) = static_cast<double>(kind_ == RegulatorKind::gp ? buffer_.size() : 0);
  return y;
}

HybridSystem ClosedLoop::system() {
  HybridSystem sys;
  sys.flow_map = [this](double t, const State& x) { return flow(t, x); };
  sys.output_map = [this](double, const State& x) { return outputs(x); };
  if (kind_ == RegulatorKind::gp) {
    sys.jump_map = [this](const State& x) { return jump(x); };
    sys.event_value = [this](const State& x) { return sigma2(x) - params_.sigma_thr2; };
    sys.event_rate = [this](double, const State& x) { return sigma2_rate(x); };
  }
  return sys;
}

HybridSystem assemble_closed_loop(ClosedLoop& loop) { return loop.system(); }

}  // namespace gpreg
