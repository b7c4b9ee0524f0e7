#include "gpreg/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace gpreg {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double tail_sup_error(const HybridArc& arc, double t_from) {
  double sup = 0.0;
  for (const auto& seg : arc.segments) {
    for (const auto& pt : seg.points) {
      if (pt.t >= t_from) sup = std::max(sup, std::abs(pt.y(LoopOutputs::e)));
    }
  }
  return sup;
}

RunResult run_experiment(const ExperimentConfig& cfg, RegulatorKind kind) {
  cfg.validate();
  if (kind == RegulatorKind::gp && !cfg.gp_enabled) throw ConfigError("gp_identifier.enabled", "GP regulator is disabled");
  if (kind == RegulatorKind::baseline && !cfg.baseline_enabled) {
    throw ConfigError("baseline.enabled", "baseline regulator is disabled");
  }

  ClosedLoop loop(cfg.loop, kind);
  const State x0 = loop.initial_state(cfg.initial);
  const HybridSystem sys = loop.system();

  RunResult r;
  r.eta_dim = cfg.loop.model_order();
  const auto start = std::chrono::steady_clock::now();
  r.arc = simulate(sys, x0, cfg.sim);
  const auto stop = std::chrono::steady_clock::now();

  auto& s = r.summary;
  s.kind = kind;
  s.exosystem = cfg.loop.exosystem;
  s.t_end = cfg.sim.t_end;
  s.tail_fraction = cfg.tail_fraction;
  s.wall_seconds = std::chrono::duration<double>(stop - start).count();
  s.tail_sup_e = tail_sup_error(r.arc, (1.0 - cfg.tail_fraction) * cfg.sim.t_end);
  for (const auto& seg : r.arc.segments) {
    s.accepted_steps += seg.accepted_steps;
    s.rejected_steps += seg.rejected_steps;
  }
  for (const auto& seg : r.arc.segments) {
    if (seg.t_end() > seg.t_begin()) {
      for (const auto& pt : seg.points) s.initial_sup_e = std::max(s.initial_sup_e, std::abs(pt.y(LoopOutputs::e)));
      break;
    }
  }

  r.dwell = dwell_time_monitor(r.arc);
  s.jump_count = r.dwell.jump_count;
  s.min_interjump = r.dwell.min_interjump;
  s.max_interjump = r.dwell.max_interjump;
  s.max_post_jump_sigma2 = s.jump_count ? r.dwell.max_event_post + cfg.loop.sigma_thr2
                                        : std::numeric_limits<double>::quiet_NaN();
  s.zeno_truncated = r.arc.zeno_truncated;
  s.dwell_ok = r.dwell.post_jump_in_flow_set && (!s.min_interjump || *s.min_interjump > 0.0) && !s.zeno_truncated;
  return r;
}

Comparison compare(const RunResult& gp, const RunResult& baseline) {
  const auto& a = gp.summary;
  const auto& b = baseline.summary;
  if (a.kind != RegulatorKind::gp || b.kind != RegulatorKind::baseline) {
    throw std::invalid_argument("compare expects a GP run and a baseline run");
  }
  if (a.exosystem != b.exosystem || a.t_end != b.t_end || a.tail_fraction != b.tail_fraction) {
    throw std::invalid_argument("compared runs must share exosystem, horizon and tail window");
  }
  Comparison c{a, b, 0.0};
  c.ratio = b.tail_sup_e > 0.0 ? a.tail_sup_e / b.tail_sup_e : std::numeric_limits<double>::infinity();
  return c;
}

void write_trace_csv(std::ostream& out, const HybridArc& arc, std::size_t eta_dim) {
  out << "t,j,e";
  for (std::size_t i = 1; i <= eta_dim; ++i) out << ",eta_" << i;
  out << ",xi1,xi2,sigma2,u,w1,w2,w3,w4,d_w\n";
  const auto d = static_cast<Eigen::Index>(eta_dim);
  for (const auto& seg : arc.segments) {
    for (const auto& pt : seg.points) {
      out << format_double(pt.t) << ',' << seg.j << ',' << format_double(pt.y(LoopOutputs::e));
      for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(pt.x(LoopLayout::eta + i));
      out << ',' << format_double(pt.x(LoopLayout::eta + d)) << ',' << format_double(pt.x(LoopLayout::eta + d + 1))
          << ',' << format_double(pt.y(LoopOutputs::sigma2)) << ',' << format_double(pt.y(LoopOutputs::u));
      for (Eigen::Index i = 0; i < 4; ++i) out << ',' << format_double(pt.x(LoopLayout::w + i));
      out << ',' << format_double(pt.y(LoopOutputs::d_w)) << '\n';
    }
  }
}

void write_jump_csv(std::ostream& out, const HybridArc& arc, double sigma_thr2, std::size_t capacity) {
  out << "j,t,sigma2_pre,sigma2_post,buffer_len\n";
  for (std::size_t k = 0; k < arc.jumps.size(); ++k) {
    const auto& jr = arc.jumps[k];
    out << jr.j << ',' << format_double(jr.t) << ',' << format_double(jr.event_pre + sigma_thr2) << ','
        << format_double(jr.event_post + sigma_thr2) << ',' << std::min(k + 1, capacity) << '\n';
  }
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : "nan"; }

}  // namespace

void write_summary(std::ostream& out, const RunSummary& s) {
  out << "regulator=" << to_string(s.kind) << '\n'
      << "exosystem=" << to_string(s.exosystem) << '\n'
      << "t_end=" << format_double(s.t_end) << '\n'
      << "tail_fraction=" << format_double(s.tail_fraction) << '\n'
      << "tail_sup_e=" << format_double(s.tail_sup_e) << '\n'
      << "initial_sup_e=" << format_double(s.initial_sup_e) << '\n'
      << "jump_count=" << s.jump_count << '\n'
      << "min_interjump=" << opt(s.min_interjump) << '\n'
      << "max_interjump=" << opt(s.max_interjump) << '\n'
      << "max_post_jump_sigma2=" << format_double(s.max_post_jump_sigma2) << '\n'
      << "zeno_truncated=" << (s.zeno_truncated ? "true" : "false") << '\n'
      << "dwell_ok=" << (s.dwell_ok ? "true" : "false") << '\n'
      << "accepted_steps=" << s.accepted_steps << '\n'
      << "rejected_steps=" << s.rejected_steps << '\n'
      << "wall_seconds=" << format_double(s.wall_seconds) << '\n';
}

void write_comparison(std::ostream& out, const Comparison& c) {
  out << "exosystem=" << to_string(c.gp.exosystem) << '\n'
      << "tail_sup_e_gp=" << format_double(c.gp.tail_sup_e) << '\n'
      << "tail_sup_e_baseline=" << format_double(c.baseline.tail_sup_e) << '\n'
      << "ratio=" << format_double(c.ratio) << '\n'
      << "gp_jump_count=" << c.gp.jump_count << '\n';
}

void write_gnuplot(std::ostream& out, const std::string& trace_file, std::size_t eta_dim) {
  const std::size_t sigma_col = 3 + eta_dim + 3;
  out << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set xlabel 't [s]'\n"
      << "set multiplot layout 3,1\n"
      << "plot '" << trace_file << "' using 1:3 with lines title 'e'\n"
      << "plot '" << trace_file << "' using 1:" << sigma_col + 6 << " with lines title 'd(w)'\n"
      << "plot '" << trace_file << "' using 1:" << sigma_col << " with lines title 'sigma2'\n"
      << "unset multiplot\n";
}

std::string run_stem(const ExperimentConfig& cfg, RegulatorKind kind) {
  return std::string(to_string(cfg.loop.exosystem)) + "_" + std::string(to_string(kind));
}

ExportPaths export_arc(const RunResult& run, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                       const std::string& stem) {
  std::filesystem::create_directories(dir);
  ExportPaths paths{dir / (stem + "_trace.csv"), dir / (stem + "_jumps.csv"), dir / (stem + "_summary.txt")};
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
  };
  {
    auto f = open(paths.trace);
    write_trace_csv(f, run.arc, run.eta_dim);
    if (!f) throw std::runtime_error("write failed: " + paths.trace.string());
  }
  {
    auto f = open(paths.jumps);
    write_jump_csv(f, run.arc, cfg.loop.sigma_thr2, cfg.loop.n_ds);
    if (!f) throw std::runtime_error("write failed: " + paths.jumps.string());
  }
  {
    auto f = open(paths.summary);
    write_summary(f, run.summary);
    if (!f) throw std::runtime_error("write failed: " + paths.summary.string());
  }
  if (cfg.gnuplot) {
    auto f = open(dir / (stem + ".gp"));
    write_gnuplot(f, paths.trace.filename().string(), run.eta_dim);
  }
  return paths;
}

}  // namespace gpreg
