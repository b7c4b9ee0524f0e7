#pragma once

// Simulation of hybrid systems with a single flow set / jump set pair.
//
// Both sets are described by one scalar event function: the state flows while
// event_value(x) <= 0 and may jump while event_value(x) >= 0. On the common
// boundary the jump wins. Flows are integrated with an adaptive Dormand-Prince
// 5(4) scheme; upward zero crossings of the event function are localized by
// bisection on the dense-output interpolant.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gpreg {

using State = Eigen::VectorXd;

struct HybridSystem {
  std::function<State(double, const State&)> flow_map;
  // Empty jump_map or event_value means the system never jumps.
  std::function<State(const State&)> jump_map;
  std::function<double(const State&)> event_value;
  // Optional time derivative of event_value along the flow, used for dwell-time witnesses.
  std::function<double(double, const State&)> event_rate;
  // Optional diagnostics stored next to every recorded point. Evaluated while
  // the system is in the discrete mode that owns the point.
  std::function<Eigen::VectorXd(double, const State&)> output_map;

  bool has_jumps() const { return static_cast<bool>(jump_map) && static_cast<bool>(event_value); }
  bool in_flow_set(const State& x) const { return !has_jumps() || event_value(x) <= 0.0; }
  bool in_jump_set(const State& x) const { return has_jumps() && event_value(x) >= 0.0; }
};

struct IntegratorConfig {
  double step_initial = 1e-3;
  double step_max = 0.05;
  double tol_rel = 1e-8;
  double tol_abs = 1e-10;
  double event_tol = 1e-9;
  double t_end = 1.0;
  std::size_t max_jumps = 100000;
  // Minimum spacing of recorded trajectory points; 0 records every accepted step.
  double record_dt = 0.0;

  void validate() const;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t, State x);
  double time() const { return t_; }
  const State& state() const { return x_; }

 private:
  double t_;
  State x_;
};

struct ArcPoint {
  double t = 0.0;
  State x;
  Eigen::VectorXd y;  // output_map(t, x), empty without one
};

struct FlowSegment {
  std::size_t j = 0;
  std::vector<ArcPoint> points;
  double max_abs_event_rate = 0.0;  // over accepted steps, 0 without event_rate
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;

  double t_begin() const { return points.front().t; }
  double t_end() const { return points.back().t; }
};

struct JumpRecord {
  std::size_t j = 0;  // index of the flow interval that ended with this jump
  double t = 0.0;
  State pre;
  State post;
  double event_pre = 0.0;
  double event_post = 0.0;
};

struct HybridInterval {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::size_t j = 0;
};

struct HybridTimeDomain {
  std::vector<HybridInterval> intervals;
};

struct HybridArc {
  HybridTimeDomain domain;
  std::vector<FlowSegment> segments;
  std::vector<JumpRecord> jumps;
  bool zeno_truncated = false;

  bool empty() const { return segments.empty(); }
  const ArcPoint& final_point() const { return segments.back().points.back(); }
};

enum class FlowExit { event, horizon };

struct FlowResult {
  FlowSegment segment;
  FlowExit exit = FlowExit::horizon;
};

FlowResult integrate_flow(const HybridSystem& sys, const State& x0, double t_start, const IntegratorConfig& cfg,
                          std::size_t j = 0);

// Applies the jump map; throws std::logic_error when x is outside the jump set.
State execute_jump(const HybridSystem& sys, const State& x);

HybridArc simulate(const HybridSystem& sys, const State& x0, const IntegratorConfig& cfg);

struct DwellReport {
  std::size_t jump_count = 0;
  std::optional<double> min_interjump;  // undefined with fewer than two jumps
  std::optional<double> max_interjump;
  double max_event_post = -std::numeric_limits<double>::infinity();
  bool post_jump_in_flow_set = true;  // every event_post < 0
  double max_abs_event_rate = 0.0;
  // (-max_event_post) / max_abs_event_rate: a lower bound any flow interval
  // starting right after a jump must respect.
  std::optional<double> dwell_lower_bound;
  bool dwell_bound_respected = true;
};

DwellReport dwell_time_monitor(const HybridArc& arc);

}  // namespace gpreg
