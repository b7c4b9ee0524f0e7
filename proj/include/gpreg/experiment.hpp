#pragma once

// Batch runs of the VTOL closed loop: metrics, GP-vs-baseline comparison and
// CSV export.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "gpreg/config.hpp"
#include "gpreg/hybrid_engine.hpp"
#include "gpreg/vtol_testbed.hpp"

namespace gpreg {

struct RunSummary {
  RegulatorKind kind = RegulatorKind::gp;
  Exosystem exosystem = Exosystem::linear;
  double t_end = 0.0;
  double tail_fraction = 0.2;
  double tail_sup_e = 0.0;     // sup |e| over recorded points with t >= (1 - tail_fraction) t_end
  double initial_sup_e = 0.0;  // sup |e| over the first flow segment of positive length
  std::size_t jump_count = 0;
  std::optional<double> min_interjump;
  std::optional<double> max_interjump;
  double max_post_jump_sigma2 = 0.0;  // NaN without jumps
  bool zeno_truncated = false;
  bool dwell_ok = true;  // every post-jump sigma2 below threshold, T_min > 0, no zeno flag
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  double wall_seconds = 0.0;
};

struct RunResult {
  HybridArc arc;
  RunSummary summary;
  DwellReport dwell;
  std::size_t eta_dim = 2;
};

// Simulates one regulator on the configured plant. Throws ConfigError when the
// configuration is invalid and IntegrationError when the flow breaks down.
RunResult run_experiment(const ExperimentConfig& cfg, RegulatorKind kind);

// sup |e| over recorded points at or after t_from.
double tail_sup_error(const HybridArc& arc, double t_from);

struct Comparison {
  RunSummary gp;
  RunSummary baseline;
  double ratio = 0.0;  // tail_sup_e(gp) / tail_sup_e(baseline)
};

Comparison compare(const RunResult& gp, const RunResult& baseline);

// Trace CSV, one row per recorded point:
//   t,j,e,eta_1..eta_d,xi1,xi2,sigma2,u,w1,w2,w3,w4,d_w
void write_trace_csv(std::ostream& out, const HybridArc& arc, std::size_t eta_dim);
// j,t,sigma2_pre,sigma2_post,buffer_len
void write_jump_csv(std::ostream& out, const HybridArc& arc, double sigma_thr2, std::size_t capacity);
void write_summary(std::ostream& out, const RunSummary& s);
void write_comparison(std::ostream& out, const Comparison& c);
void write_gnuplot(std::ostream& out, const std::string& trace_file, std::size_t eta_dim);

struct ExportPaths {
  std::filesystem::path trace;
  std::filesystem::path jumps;
  std::filesystem::path summary;
};

// Writes <stem>_trace.csv, <stem>_jumps.csv, <stem>_summary.txt (and
// <stem>.gp when requested) into dir.
ExportPaths export_arc(const RunResult& run, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                       const std::string& stem);

std::string run_stem(const ExperimentConfig& cfg, RegulatorKind kind);

// Formats with 17 significant digits; NaN prints as "nan".
std::string format_double(double v);

}  // namespace gpreg
