#include <doctest.h>

#include <cmath>

#include "gpreg/hybrid_engine.hpp"

using namespace gpreg;

namespace {

State scalar(double v) { return State::Constant(1, v); }

HybridSystem timer() {
  HybridSystem sys;
  sys.flow_map = [](double, const State&) { return scalar(1.0); };
  sys.jump_map = [](const State&) { return scalar(0.0); };
  sys.event_value = [](const State& x) { return x(0) - 1.0; };
  sys.event_rate = [](double, const State&) { return 1.0; };
  return sys;
}

IntegratorConfig config(double t_end) {
  IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.step_initial = 1e-3;
  cfg.step_max = 0.05;
  cfg.event_tol = 1e-10;
  return cfg;
}

}  // namespace

TEST_SUITE("hybrid_engine") {
  TEST_CASE("constant flow reaches the horizon unchanged") {
    HybridSystem sys;
    sys.flow_map = [](double, const State& x) { return State::Zero(x.size()); };
    const auto r = integrate_flow(sys, State::Constant(3, 2.5), 0.0, config(2.0));
    CHECK(r.exit == FlowExit::horizon);
    CHECK(r.segment.t_end() == 2.0);
    CHECK(r.segment.points.back().x == State::Constant(3, 2.5));
  }

  TEST_CASE("exponential decay matches the analytic solution") {
    HybridSystem sys;
    sys.flow_map = [](double, const State& x) { return State(-x); };
    auto cfg = config(1.0);
    cfg.tol_rel = 1e-10;
    cfg.tol_abs = 1e-12;
    const auto r = integrate_flow(sys, scalar(1.0), 0.0, cfg);
    CHECK(std::abs(r.segment.points.back().x(0) - std::exp(-1.0)) < 1e-8);
  }

  TEST_CASE("linear clock crossing is localized within event_tol") {
    const auto sys = timer();
    const auto cfg = config(5.0);
    const auto r = integrate_flow(sys, scalar(0.0), 0.0, cfg);
    CHECK(r.exit == FlowExit::event);
    CHECK(std::abs(r.segment.t_end() - 1.0) <= cfg.event_tol);
    CHECK(r.segment.points.back().x(0) >= 1.0);
  }

  TEST_CASE("flow starting on the jump set exits immediately") {
    const auto r = integrate_flow(timer(), scalar(1.0), 0.0, config(5.0));
    CHECK(r.exit == FlowExit::event);
    CHECK(r.segment.points.size() == 1);
  }

  TEST_CASE("non-finite derivative raises an integration error with state context") {
    HybridSystem sys;
    sys.flow_map = [](double, const State& x) { return State::Constant(1, std::log(x(0) - 1.0)); };
    try {
      integrate_flow(sys, scalar(0.5), 0.0, config(1.0));
      FAIL("expected an IntegrationError");
    } catch (const IntegrationError& e) {
      CHECK(e.state().size() == 1);
      CHECK(e.time() == 0.0);
    }
  }

  TEST_CASE("finite-time blow-up raises step-size underflow") {
    HybridSystem sys;
    sys.flow_map = [](double, const State& x) { return State(x.cwiseProduct(x)); };
    CHECK_THROWS_AS(integrate_flow(sys, scalar(1.0), 0.0, config(2.0)), IntegrationError);
  }

  TEST_CASE("jump outside the jump set is a contract violation") {
    CHECK_THROWS_AS(execute_jump(timer(), scalar(0.2)), std::logic_error);
    CHECK(execute_jump(timer(), scalar(1.0))(0) == 0.0);
  }

  TEST_CASE("timer arc jumps at 1, 2, 3 with four flow segments") {
    const auto arc = simulate(timer(), scalar(0.0), config(3.5));
    REQUIRE(arc.jumps.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(arc.jumps[k].t == doctest::Approx(k + 1.0).epsilon(1e-9));
      CHECK(arc.jumps[k].j == k);
      CHECK(arc.jumps[k].post(0) == 0.0);
    }
    CHECK(arc.segments.size() == 4);
    CHECK_FALSE(arc.zeno_truncated);
    CHECK(arc.final_point().t == 3.5);
  }

  TEST_CASE("hybrid time domain tiles the horizon") {
    const auto arc = simulate(timer(), scalar(0.0), config(3.5));
    const auto& iv = arc.domain.intervals;
    REQUIRE(iv.size() == 4);
    CHECK(iv.front().t_begin == 0.0);
    CHECK(iv.back().t_end == 3.5);
    for (std::size_t k = 0; k < iv.size(); ++k) {
      CHECK(iv[k].j == k);
      CHECK(iv[k].t_begin <= iv[k].t_end);
      if (k > 0) CHECK(iv[k].t_begin == iv[k - 1].t_end);
    }
    for (std::size_t k = 0; k < arc.jumps.size(); ++k) {
      CHECK(arc.segments[k + 1].points.front().x == arc.jumps[k].post);
      CHECK(arc.segments[k].points.back().x == arc.jumps[k].pre);
    }
  }

  TEST_CASE("always-jump system is truncated with the zeno flag") {
    HybridSystem sys;
    sys.flow_map = [](double, const State& x) { return State::Zero(x.size()); };
    sys.jump_map = [](const State& x) { return State(x.array() + 1.0); };
    sys.event_value = [](const State&) { return 1.0; };
    auto cfg = config(1.0);
    cfg.max_jumps = 25;
    const auto arc = simulate(sys, scalar(0.0), cfg);
    CHECK(arc.zeno_truncated);
    CHECK(arc.jumps.size() == 25);
  }

  TEST_CASE("initial state in the jump set jumps at t = 0") {
    const auto arc = simulate(timer(), scalar(1.0), config(0.5));
    REQUIRE_FALSE(arc.jumps.empty());
    CHECK(arc.jumps.front().t == 0.0);
  }

  TEST_CASE("zero horizon gives an empty arc") {
    const auto arc = simulate(timer(), scalar(0.0), config(0.0));
    CHECK(arc.empty());
    CHECK(arc.jumps.empty());
  }

  TEST_CASE("boundary state belongs to both sets and the jump wins") {
    const auto sys = timer();
    CHECK(sys.in_flow_set(scalar(1.0)));
    CHECK(sys.in_jump_set(scalar(1.0)));
    const auto arc = simulate(sys, scalar(1.0), config(0.1));
    CHECK(arc.jumps.size() == 1);
  }

  TEST_CASE("dwell monitor on the timer arc") {
    const auto rep = dwell_time_monitor(simulate(timer(), scalar(0.0), config(3.5)));
    CHECK(rep.jump_count == 3);
    REQUIRE(rep.min_interjump);
    CHECK(*rep.min_interjump == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(*rep.max_interjump == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.post_jump_in_flow_set);
    CHECK(rep.max_event_post == -1.0);
    REQUIRE(rep.dwell_lower_bound);
    CHECK(*rep.dwell_lower_bound == doctest::Approx(1.0));
    CHECK(rep.dwell_bound_respected);
  }

  TEST_CASE("dwell monitor with a single jump leaves inter-jump statistics undefined") {
    const auto rep = dwell_time_monitor(simulate(timer(), scalar(0.0), config(1.5)));
    CHECK(rep.jump_count == 1);
    CHECK_FALSE(rep.min_interjump);
    CHECK_FALSE(rep.max_interjump);
    CHECK_FALSE(rep.dwell_lower_bound);
  }

  TEST_CASE("record spacing thins the stored trajectory") {
    HybridSystem sys;
    sys.flow_map = [](double, const State& x) { return State(-x); };
    auto dense = config(1.0);
    dense.step_max = 0.001;
    auto sparse = dense;
    sparse.record_dt = 0.1;
    const auto a = simulate(sys, scalar(1.0), dense);
    const auto b = simulate(sys, scalar(1.0), sparse);
    CHECK(b.segments[0].points.size() < a.segments[0].points.size() / 10 + 3);
    CHECK(b.final_point().t == 1.0);
    CHECK(b.final_point().x(0) == a.final_point().x(0));
  }

  TEST_CASE("integrator configuration is validated") {
    auto cfg = config(1.0);
    cfg.tol_rel = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = config(-1.0);
    CHECK_THROWS(cfg.validate());
  }
}
