#pragma once

// Experiment configuration: a sectioned key = value file.
//
//   [experiment]     exosystem, preset, output_dir, tail_fraction, gnuplot
//   [gp_identifier]  enabled, sigma_p2, sigma_n2, lambda_eta, lambda_tau, sigma_thr2, n_ds
//   [regulator_core] g, h, l, delta, c, L, m1, m2, rho
//   [baseline]       enabled, p0, forgetting_rate
//   [hybrid_engine]  step_initial, step_max, tol_rel, tol_abs, event_tol, t_end, max_jumps, record_dt
//   [vtol_testbed]   M, J, wing_l, grav, w0, chi0, zeta0, eta0, xi1_0, xi2_0
//
// Vector values are whitespace separated. The preset supplies every value;
// keys present in the file override it.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpreg/hybrid_engine.hpp"
#include "gpreg/vtol_testbed.hpp"

namespace gpreg {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ExperimentConfig {
  std::string preset = "desk";
  ClosedLoopParams loop;
  bool gp_enabled = true;
  bool baseline_enabled = true;
  IntegratorConfig sim;
  InitialConditions initial;
  double tail_fraction = 0.2;
  std::string output_dir = "out";
  bool gnuplot = false;

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Names of the built-in parameter sets.
std::vector<std::string> preset_names();
// Complete configuration for a preset; throws ConfigError on an unknown name.
ExperimentConfig make_preset(const std::string& name);

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

// Writes a file that parse_config reads back to the same configuration.
void write_config(std::ostream& out, const ExperimentConfig& cfg);

}  // namespace gpreg
