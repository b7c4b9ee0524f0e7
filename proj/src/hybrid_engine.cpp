#include "gpreg/hybrid_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gpreg {

namespace {

// Dormand-Prince 5(4) tableau with Hairer's dense output coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct DenseStep {
  State r1, r2, r3, r4, r5;

  State at(double theta) const {
    const double t1 = 1.0 - theta;
    return r1 + theta * (r2 + t1 * (r3 + theta * (r4 + t1 * r5)));
  }
};

std::string describe(const State& x) {
  std::ostringstream os;
  os.precision(6);
  os << "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << "]";
  return os.str();
}

Eigen::VectorXd eval_output(const HybridSystem& sys, double t, const State& x) {
  return sys.output_map ? sys.output_map(t, x) : Eigen::VectorXd();
}

State eval_flow(const HybridSystem& sys, double t, const State& x) {
  State dx = sys.flow_map(t, x);
  if (dx.size() != x.size()) throw IntegrationError("flow map returned a vector of the wrong size", t, x);
  if (!dx.allFinite()) throw IntegrationError("non-finite derivative at state " + describe(x), t, x);
  return dx;
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(step_initial > 0.0) || !(step_max > 0.0) || !(tol_rel > 0.0) || !(tol_abs > 0.0) || !(event_tol > 0.0)) {
    throw std::invalid_argument("integrator step sizes and tolerances must be positive");
  }
  if (!(t_end >= 0.0)) throw std::invalid_argument("integration horizon must be non-negative");
  if (record_dt < 0.0) throw std::invalid_argument("record_dt must be non-negative");
}

IntegrationError::IntegrationError(const std::string& what, double t, State x)
    : std::runtime_error(what + " (t = " + std::to_string(t) + ")"), t_(t), x_(std::move(x)) {}

FlowResult integrate_flow(const HybridSystem& sys, const State& x0, double t_start, const IntegratorConfig& cfg,
                          std::size_t j) {
  FlowResult result;
  result.segment.j = j;
  result.segment.points.push_back({t_start, x0, eval_output(sys, t_start, x0)});

  const bool watch_events = sys.has_jumps();
  double g0 = watch_events ? sys.event_value(x0) : -1.0;
  if (std::isnan(g0)) throw IntegrationError("event function is NaN", t_start, x0);
  if (watch_events && g0 >= 0.0) {
    result.exit = FlowExit::event;
    return result;
  }

  const double t_final = cfg.t_end;
  double t = t_start;
  State x = x0;
  State k1 = eval_flow(sys, t, x);
  double h = std::min(cfg.step_initial, cfg.step_max);
  double last_record = t_start;
  auto& seg = result.segment;
  if (watch_events && sys.event_rate) seg.max_abs_event_rate = std::abs(sys.event_rate(t, x));

  while (t < t_final) {
    const double remaining = t_final - t;
    bool last = false;
    if (h >= remaining) {
      h = remaining;
      last = true;
    }
    const double h_min = 1e-14 * std::max(1.0, std::abs(t));
    if (h < h_min) throw IntegrationError("step size underflow (stiff or singular flow) at state " + describe(x), t, x);

    const State k2 = eval_flow(sys, t + c2 * h, x + h * (a21 * k1));
    const State k3 = eval_flow(sys, t + c3 * h, x + h * (a31 * k1 + a32 * k2));
    const State k4 = eval_flow(sys, t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = eval_flow(sys, t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 = eval_flow(sys, t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    State x1 = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = eval_flow(sys, last ? t_final : t + h, x1);
    const State err_vec = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    const Eigen::ArrayXd scale = cfg.tol_abs + cfg.tol_rel * x.array().abs().max(x1.array().abs());
    const double err = std::sqrt((err_vec.array() / scale).square().mean());

    if (!(err <= 1.0)) {
      ++seg.rejected_steps;
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
      h *= fac;
      continue;
    }
    ++seg.accepted_steps;
    const double t1 = last ? t_final : t + h;

    if (watch_events) {
      const double g1 = sys.event_value(x1);
      if (std::isnan(g1)) throw IntegrationError("event function is NaN", t1, x1);
      if (g1 >= 0.0) {
        DenseStep dense;
        dense.r1 = x;
        dense.r2 = x1 - x;
        dense.r3 = h * k1 - dense.r2;
        dense.r4 = dense.r2 - h * k7 - dense.r3;
        dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        double lo = 0.0;
        double hi = 1.0;
        State x_hi = x1;
        while ((hi - lo) * h > cfg.event_tol) {
          const double mid = 0.5 * (lo + hi);
          State xm = dense.at(mid);
          if (sys.event_value(xm) >= 0.0) {
            hi = mid;
            x_hi = std::move(xm);
          } else {
            lo = mid;
          }
        }
        const double te = (hi == 1.0) ? t1 : t + hi * h;
        if (sys.event_rate) {
          seg.max_abs_event_rate = std::max(seg.max_abs_event_rate, std::abs(sys.event_rate(te, x_hi)));
        }
        Eigen::VectorXd y = eval_output(sys, te, x_hi);
        seg.points.push_back({te, std::move(x_hi), std::move(y)});
        result.exit = FlowExit::event;
        return result;
      }
      if (sys.event_rate) seg.max_abs_event_rate = std::max(seg.max_abs_event_rate, std::abs(sys.event_rate(t1, x1)));
      g0 = g1;
    }

    t = t1;
    x = std::move(x1);
    k1 = k7;
    if (last || t - last_record >= cfg.record_dt) {
      seg.points.push_back({t, x, eval_output(sys, t, x)});
      last_record = t;
    }
    const double fac = (err > 0.0) ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0) : 5.0;
    h = std::min(h * fac, cfg.step_max);
  }
  result.exit = FlowExit::horizon;
  return result;
}

State execute_jump(const HybridSystem& sys, const State& x) {
  if (!sys.in_jump_set(x)) throw std::logic_error("jump requested outside the jump set");
  return sys.jump_map(x);
}

HybridArc simulate(const HybridSystem& sys, const State& x0, const IntegratorConfig& cfg) {
  cfg.validate();
  HybridArc arc;
  if (cfg.t_end <= 0.0) return arc;

  State x = x0;
  double t = 0.0;
  std::size_t j = 0;
  FlowSegment current;
  current.j = 0;
  current.points.push_back({t, x, eval_output(sys, t, x)});

  auto close_interval = [&](FlowSegment&& seg) {
    arc.domain.intervals.push_back({seg.t_begin(), seg.t_end(), seg.j});
    arc.segments.push_back(std::move(seg));
  };

  while (true) {
    if (sys.in_jump_set(x)) {
      if (arc.jumps.size() >= cfg.max_jumps) {
        arc.zeno_truncated = true;
        close_interval(std::move(current));
        break;
      }
      JumpRecord rec;
      rec.j = j;
      rec.t = t;
      rec.pre = x;
      rec.event_pre = sys.event_value(x);
      rec.post = execute_jump(sys, x);
      if (!rec.post.allFinite()) throw IntegrationError("jump map produced a non-finite state", t, x);
      rec.event_post = sys.event_value(rec.post);
      x = rec.post;
      arc.jumps.push_back(std::move(rec));
      close_interval(std::move(current));
      ++j;
      current = FlowSegment{};
      current.j = j;
      current.points.push_back({t, x, eval_output(sys, t, x)});
      continue;
    }
    if (t >= cfg.t_end) {
      close_interval(std::move(current));
      break;
    }
    FlowResult flow = integrate_flow(sys, x, t, cfg, j);
    const double rate = flow.segment.max_abs_event_rate;
    current.max_abs_event_rate = std::max(current.max_abs_event_rate, rate);
    current.accepted_steps += flow.segment.accepted_steps;
    current.rejected_steps += flow.segment.rejected_steps;
    auto& pts = flow.segment.points;
    current.points.insert(current.points.end(), std::make_move_iterator(pts.begin() + 1),
                          std::make_move_iterator(pts.end()));
    x = current.points.back().x;
    t = current.points.back().t;
    if (flow.exit == FlowExit::horizon) {
      close_interval(std::move(current));
      break;
    }
  }
  return arc;
}

DwellReport dwell_time_monitor(const HybridArc& arc) {
  DwellReport r;
  r.jump_count = arc.jumps.size();
  for (std::size_t k = 1; k < arc.jumps.size(); ++k) {
    const double dt = arc.jumps[k].t - arc.jumps[k - 1].t;
    r.min_interjump = r.min_interjump ? std::min(*r.min_interjump, dt) : dt;
    r.max_interjump = r.max_interjump ? std::max(*r.max_interjump, dt) : dt;
  }
  for (const auto& jr : arc.jumps) {
    r.max_event_post = std::max(r.max_event_post, jr.event_post);
    if (!(jr.event_post < 0.0)) r.post_jump_in_flow_set = false;
  }
  for (const auto& seg : arc.segments) r.max_abs_event_rate = std::max(r.max_abs_event_rate, seg.max_abs_event_rate);
  if (r.min_interjump && r.max_abs_event_rate > 0.0 && r.max_event_post < 0.0) {
    r.dwell_lower_bound = -r.max_event_post / r.max_abs_event_rate;
    r.dwell_bound_respected = *r.min_interjump >= *r.dwell_lower_bound;
  }
  return r;
}

}  // namespace gpreg
