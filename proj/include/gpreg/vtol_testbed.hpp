#pragma once

// Lateral/angular VTOL aircraft pushed by a wind disturbance generated by one
// of three exosystems, in raw coordinates (y1, y2, theta1, theta2) and in the
// chain-of-integrators coordinates
//
//   chi1 = y1,  chi2 = y2,  chi3 = d(w) - g tan(theta1),
//   zeta = L_s d(w) - g theta2 / cos^2(theta1),
//
// plus the regulated closed loop built around it.

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "gpreg/gp_identifier.hpp"
#include "gpreg/hybrid_engine.hpp"
#include "gpreg/regulator_core.hpp"

namespace gpreg {

struct VtolParams {
  double M = 5e4;
  double J = 1.25e4;
  double wing_l = 2.0;
  double grav = 9.81;

  void validate() const;
  // 2 l / J: angular acceleration per unit wingtip force.
  double input_gain() const { return 2.0 * wing_l / J; }
};

enum class Exosystem { linear, duffing, arctan };

std::string_view to_string(Exosystem e);
Exosystem exosystem_from_string(std::string_view s);

using ExoState = Eigen::Vector4d;

ExoState exo_flow(const ExoState& w, Exosystem variant);

struct Disturbance {
  double d = 0.0;
  double Ls_d = 0.0;   // first Lie derivative along the exosystem
  double Ls2_d = 0.0;  // second Lie derivative
};

Disturbance disturbance(const ExoState& w, Exosystem variant, const VtolParams& params);

struct RawState {
  double y1 = 0.0;
  double y2 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
};

struct TransformedState {
  Eigen::Vector3d chi = Eigen::Vector3d::Zero();
  double zeta = 0.0;
};

TransformedState to_transformed(const RawState& raw, const Disturbance& dist, const VtolParams& params);
RawState to_raw(const TransformedState& x, const Disturbance& dist, const VtolParams& params);

double plant_q(const TransformedState& x, const Disturbance& dist, const VtolParams& params);
double plant_omega(const TransformedState& x, const Disturbance& dist, const VtolParams& params);

// (chi1', chi2', chi3', zeta')
Eigen::Vector4d transformed_flow(const TransformedState& x, const Disturbance& dist, double u,
                                 const VtolParams& params);

// (y1', y2', theta1', theta2'); throws at |theta1| >= pi/2.
Eigen::Vector4d vtol_raw_flow(const RawState& raw, const Disturbance& dist, double u, const VtolParams& params);

// u = gain_L [c1 l delta^3 (y1 + eta1) + c2 l delta^2 y2 + c3 l delta (-g tan theta1)
//             + l (-g theta2 / cos^2 theta1)]
// Only measured raw quantities enter. With gain_L = -L this equals
// control_action(L) plus the feedforward l (c3 delta d + L_s d).
double vtol_control_law(const RawState& raw, double eta1, const StabilizerParams& stab, double gain_L,
                        const VtolParams& params);
// Same law written in transformed coordinates.
double vtol_control_law(const TransformedState& x, const Disturbance& dist, double eta1,
                        const StabilizerParams& stab, double gain_L);

// Steady-state input keeping the plant on x = 0: solves 0 = q(w, 0) + Omega(w, 0) u.
double ideal_friend(const ExoState& w, Exosystem variant, const VtolParams& params);

// ---------------------------------------------------------------------------
// Closed loop

enum class RegulatorKind { gp, baseline };

std::string_view to_string(RegulatorKind k);

struct BaselineSettings {
  double p0 = 10.0;              // initial information-matrix scale
  double forgetting_rate = 0.5;  // 1/s, continuous-time exponential forgetting
};

struct InitialConditions {
  ExoState w0 = ExoState(1.0, 0.0, 1.0, 0.0);
  Eigen::Vector3d chi0 = Eigen::Vector3d::Zero();
  double zeta0 = 0.0;
  Eigen::VectorXd eta0;  // defaults to zero of size d
  double xi1_0 = 0.0;
  double xi2_0 = 0.0;
};

struct ClosedLoopParams {
  Exosystem exosystem = Exosystem::linear;
  VtolParams plant;
  InternalModelParams internal_model;
  StabilizerParams stabilizer;
  ObserverParams observer;
  KernelParams kernel;
  double sigma_thr2 = 0.1;
  std::size_t n_ds = 100;
  BaselineSettings baseline;

  // Internal-model order d.
  std::size_t model_order() const { return static_cast<std::size_t>(internal_model.h.size()); }
  void validate(RegulatorKind kind) const;
};

// Offsets into the closed-loop state vector
//   [w(4) chi(3) zeta eta(d) xi1 xi2 tau | theta(d) P(d*d)]
// where the trailing block exists only for the baseline regulator.
struct LoopLayout {
  std::size_t d = 2;
  bool baseline = false;

  static constexpr std::size_t w = 0;
  static constexpr std::size_t chi = 4;
  static constexpr std::size_t zeta = 7;
  static constexpr std::size_t eta = 8;
  std::size_t xi1() const { return eta + d; }
  std::size_t xi2() const { return eta + d + 1; }
  std::size_t tau() const { return eta + d + 2; }
  std::size_t theta() const { return eta + d + 3; }
  std::size_t P() const { return theta() + d; }
  std::size_t size() const { return baseline ? P() + d * d : tau() + 1; }
};

// Diagnostic channels produced by the closed loop's output_map.
struct LoopOutputs {
  static constexpr Eigen::Index e = 0;
  static constexpr Eigen::Index sigma2 = 1;  // NaN for the baseline
  static constexpr Eigen::Index u = 2;
  static constexpr Eigen::Index d_w = 3;
  static constexpr Eigen::Index buffer_len = 4;
  static constexpr Eigen::Index count = 5;
};

// The VTOL plant, exosystem and regulator composed into one hybrid system.
// The GP regulator keeps its sample buffer and posterior here as the discrete
// part of the hybrid state; jump_map updates them. One instance drives one
// simulation at a time.
class ClosedLoop {
 public:
  ClosedLoop(ClosedLoopParams params, RegulatorKind kind);

  const ClosedLoopParams& params() const { return params_; }
  RegulatorKind kind() const { return kind_; }
  const LoopLayout& layout() const { return layout_; }

  // Resets the discrete state (empty buffer) and returns the continuous initial state.
  State initial_state(const InitialConditions& ic);

  HybridSystem system();

  State flow(double t, const State& x) const;
  State jump(const State& x);
  double sigma2(const State& x) const;
  double sigma2_rate(const State& x) const;
  double control(const State& x) const;
  Eigen::VectorXd outputs(const State& x) const;

  const GpPosterior& posterior() const { return *posterior_; }
  const SampleBuffer& buffer() const { return buffer_; }

 private:
  struct Parts;
  Parts unpack(const State& x) const;

  ClosedLoopParams params_;
  RegulatorKind kind_;
  LoopLayout layout_;
  StructureParams structure_;
  SampleBuffer buffer_;
  std::shared_ptr<const GpPosterior> posterior_;
};

// Convenience wrapper returning the hybrid system of a freshly reset loop.
HybridSystem assemble_closed_loop(ClosedLoop& loop);

}  // namespace gpreg
