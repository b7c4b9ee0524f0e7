#include "gpreg/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace gpreg {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"exosystem", "preset", "output_dir", "tail_fraction", "gnuplot"}},
      {"gp_identifier", {"enabled", "sigma_p2", "sigma_n2", "lambda_eta", "lambda_tau", "sigma_thr2", "n_ds"}},
      {"regulator_core", {"g", "h", "l", "delta", "c", "L", "m1", "m2", "rho"}},
      {"baseline", {"enabled", "p0", "forgetting_rate"}},
      {"hybrid_engine",
       {"step_initial", "step_max", "tol_rel", "tol_abs", "event_tol", "t_end", "max_jumps", "record_dt"}},
      {"vtol_testbed", {"M", "J", "wing_l", "grav", "w0", "chi0", "zeta0", "eta0", "xi1_0", "xi2_0"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError(key, "expected a number, got an empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + t + "'");
  }
  return v;
}

Eigen::VectorXd to_vector(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  std::vector<double> values;
  std::string tok;
  while (in >> tok) values.push_back(to_double(key, tok));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + t + "'");
}

std::size_t to_count(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key, "expected a non-negative integer, got '" + t + "'");
  }
  return static_cast<std::size_t>(std::stoull(t));
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string vec(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + num(v(i));
  return s;
}

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

}  // namespace

std::vector<std::string> preset_names() { return {"desk", "highgain"}; }

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  auto& p = cfg.loop;
  p.kernel.sigma_p2 = 1.0;
  p.kernel.sigma_n2 = 0.01;
  p.kernel.lambda_eta = Eigen::Vector2d(0.1, 0.1);
  p.kernel.lambda_tau = 2.0;
  p.sigma_thr2 = 0.1;
  p.n_ds = 100;
  p.internal_model.g = 2.0;
  p.internal_model.h = Eigen::Vector2d(15.0, 70.0);
  p.stabilizer.c = {Eigen::Vector3d(15.0, 75.0, 125.0)};
  p.stabilizer.L = Eigen::MatrixXd::Constant(1, 1, -20.0);
  p.observer = {20.0, 20.0, 2.0};
  p.plant = VtolParams{};
  // Both presets share the integrator settings; the loop is stiff at either gain level.
  cfg.sim.step_initial = 1e-7;
  cfg.sim.step_max = 1e-3;
  cfg.sim.tol_rel = 1e-8;
  cfg.sim.tol_abs = 1e-10;
  cfg.sim.event_tol = 1e-10;
  p.stabilizer.delta = 150.0;
  if (name == "highgain") {
    p.stabilizer.l = 250.0;
    cfg.sim.t_end = 5.0;
    cfg.sim.record_dt = 1e-3;
  } else if (name == "desk") {
    // Same as highgain except l. delta stays at 150 so that eta keeps the scale of
    // the kernel length scales; a smaller l relieves the stiffness that the
    // 1/cos^2 growth of the input gain causes at large roll angles.
    p.stabilizer.l = 10.0;
    cfg.sim.t_end = 50.0;
    cfg.sim.record_dt = 0.01;
  } else {
    throw ConfigError("experiment.preset", "unknown preset '" + name + "' (expected desk or highgain)");
  }
  cfg.sim.max_jumps = 100000;
  return cfg;
}

void ExperimentConfig::validate() const {
  const auto& p = loop;
  require(p.plant.M > 0.0, "vtol_testbed.M", "must be positive");
  require(p.plant.J > 0.0, "vtol_testbed.J", "must be positive");
  require(p.plant.wing_l > 0.0, "vtol_testbed.wing_l", "must be positive");
  require(p.plant.grav > 0.0, "vtol_testbed.grav", "must be positive");

  require(p.internal_model.g > 0.0, "regulator_core.g", "must be positive");
  require(p.internal_model.h.size() > 0, "regulator_core.h", "needs at least one coefficient");
  require(is_hurwitz(p.internal_model.h), "regulator_core.h", "coefficients are not Hurwitz");
  require(p.stabilizer.l > 0.0, "regulator_core.l", "must be positive");
  require(p.stabilizer.delta > 0.0, "regulator_core.delta", "must be positive");
  require(p.stabilizer.c.size() == 1 && p.stabilizer.c[0].size() == 3, "regulator_core.c",
          "the VTOL chain needs exactly three coefficients");
  require(is_hurwitz(p.stabilizer.c[0].reverse()), "regulator_core.c", "coefficients are not Hurwitz");
  require(p.stabilizer.L.size() == 1 && p.stabilizer.L(0, 0) != 0.0, "regulator_core.L",
          "must be a single non-zero value");
  require(p.observer.m1 > 0.0, "regulator_core.m1", "must be positive");
  require(p.observer.m2 > 0.0, "regulator_core.m2", "must be positive");
  require(p.observer.rho > 0.0, "regulator_core.rho", "must be positive");

  if (gp_enabled) {
    const auto& k = p.kernel;
    require(k.sigma_p2 > 0.0, "gp_identifier.sigma_p2", "must be positive");
    require(k.sigma_n2 > 0.0, "gp_identifier.sigma_n2", "must be positive");
    require(k.lambda_tau > 0.0, "gp_identifier.lambda_tau", "must be positive");
    require(k.lambda_eta.size() == p.internal_model.h.size(), "gp_identifier.lambda_eta",
            "needs one length scale per internal-model state (" + std::to_string(p.internal_model.h.size()) + ")");
    require((k.lambda_eta.array() > 0.0).all(), "gp_identifier.lambda_eta", "length scales must be positive");
    require(p.n_ds > 0, "gp_identifier.n_ds", "must be positive");
    const auto cond = check_sigma_condition(k, p.sigma_thr2);
    require(cond.ok, "gp_identifier.sigma_thr2",
            "must satisfy " + num(cond.lower) + " < sigma_thr2 < " + num(cond.upper) + " (got " + num(p.sigma_thr2) +
                ")");
  }
  if (baseline_enabled) {
    require(p.baseline.p0 > 0.0, "baseline.p0", "must be positive");
    require(p.baseline.forgetting_rate >= 0.0, "baseline.forgetting_rate", "must be non-negative");
  }
  require(gp_enabled || baseline_enabled, "gp_identifier.enabled", "at least one regulator must be enabled");

  require(sim.step_initial > 0.0, "hybrid_engine.step_initial", "must be positive");
  require(sim.step_max > 0.0, "hybrid_engine.step_max", "must be positive");
  require(sim.tol_rel > 0.0, "hybrid_engine.tol_rel", "must be positive");
  require(sim.tol_abs > 0.0, "hybrid_engine.tol_abs", "must be positive");
  require(sim.event_tol > 0.0, "hybrid_engine.event_tol", "must be positive");
  require(sim.t_end >= 0.0, "hybrid_engine.t_end", "must be non-negative");
  require(sim.record_dt >= 0.0, "hybrid_engine.record_dt", "must be non-negative");
  require(sim.max_jumps > 0, "hybrid_engine.max_jumps", "must be positive");

  const auto d = p.internal_model.h.size();
  require(initial.eta0.size() == 0 || initial.eta0.size() == d, "vtol_testbed.eta0",
          "needs " + std::to_string(d) + " entries");
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, "experiment.tail_fraction", "must be in (0, 1]");
  require(!output_dir.empty(), "experiment.output_dir", "must not be empty");
}

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string("malformed configuration: ") + e.what());
  }

  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) {
      if (body.empty()) throw ConfigError(section, "key outside any section");
      throw ConfigError(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError(section + "." + key, "unknown key");
    }
  }

  auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
    const auto node = tree.get_optional<std::string>(pt::ptree::path_type(section + "/" + key, '/'));
    if (!node) return std::nullopt;
    return trim(*node);
  };

  const std::string preset = get("experiment", "preset").value_or("desk");
  ExperimentConfig cfg = make_preset(preset);

  auto set_double = [&](const std::string& s, const std::string& k, double& out) {
    if (auto v = get(s, k)) out = to_double(s + "." + k, *v);
  };
  auto set_vector = [&](const std::string& s, const std::string& k, Eigen::VectorXd& out) {
    if (auto v = get(s, k)) out = to_vector(s + "." + k, *v);
  };
  auto set_fixed = [&](const std::string& s, const std::string& k, auto& out) {
    if (auto v = get(s, k)) {
      const Eigen::VectorXd tmp = to_vector(s + "." + k, *v);
      if (tmp.size() != out.size()) {
        throw ConfigError(s + "." + k, "expected " + std::to_string(out.size()) + " values");
      }
      out = tmp;
    }
  };
  auto set_bool = [&](const std::string& s, const std::string& k, bool& out) {
    if (auto v = get(s, k)) out = to_bool(s + "." + k, *v);
  };
  auto set_count = [&](const std::string& s, const std::string& k, std::size_t& out) {
    if (auto v = get(s, k)) out = to_count(s + "." + k, *v);
  };

  if (auto v = get("experiment", "exosystem")) {
    try {
      cfg.loop.exosystem = exosystem_from_string(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("experiment.exosystem", e.what());
    }
  }
  if (auto v = get("experiment", "output_dir")) cfg.output_dir = *v;
  set_double("experiment", "tail_fraction", cfg.tail_fraction);
  set_bool("experiment", "gnuplot", cfg.gnuplot);

  auto& p = cfg.loop;
  set_bool("gp_identifier", "enabled", cfg.gp_enabled);
  set_double("gp_identifier", "sigma_p2", p.kernel.sigma_p2);
  set_double("gp_identifier", "sigma_n2", p.kernel.sigma_n2);
  set_vector("gp_identifier", "lambda_eta", p.kernel.lambda_eta);
  set_double("gp_identifier", "lambda_tau", p.kernel.lambda_tau);
  set_double("gp_identifier", "sigma_thr2", p.sigma_thr2);
  set_count("gp_identifier", "n_ds", p.n_ds);

  set_double("regulator_core", "g", p.internal_model.g);
  set_vector("regulator_core", "h", p.internal_model.h);
  set_double("regulator_core", "l", p.stabilizer.l);
  set_double("regulator_core", "delta", p.stabilizer.delta);
  set_vector("regulator_core", "c", p.stabilizer.c[0]);
  if (auto v = get("regulator_core", "L")) p.stabilizer.L(0, 0) = to_double("regulator_core.L", *v);
  set_double("regulator_core", "m1", p.observer.m1);
  set_double("regulator_core", "m2", p.observer.m2);
  set_double("regulator_core", "rho", p.observer.rho);

  set_bool("baseline", "enabled", cfg.baseline_enabled);
  set_double("baseline", "p0", p.baseline.p0);
  set_double("baseline", "forgetting_rate", p.baseline.forgetting_rate);

  set_double("hybrid_engine", "step_initial", cfg.sim.step_initial);
  set_double("hybrid_engine", "step_max", cfg.sim.step_max);
  set_double("hybrid_engine", "tol_rel", cfg.sim.tol_rel);
  set_double("hybrid_engine", "tol_abs", cfg.sim.tol_abs);
  set_double("hybrid_engine", "event_tol", cfg.sim.event_tol);
  set_double("hybrid_engine", "t_end", cfg.sim.t_end);
  set_count("hybrid_engine", "max_jumps", cfg.sim.max_jumps);
  set_double("hybrid_engine", "record_dt", cfg.sim.record_dt);

  set_double("vtol_testbed", "M", p.plant.M);
  set_double("vtol_testbed", "J", p.plant.J);
  set_double("vtol_testbed", "wing_l", p.plant.wing_l);
  set_double("vtol_testbed", "grav", p.plant.grav);
  set_fixed("vtol_testbed", "w0", cfg.initial.w0);
  set_fixed("vtol_testbed", "chi0", cfg.initial.chi0);
  set_double("vtol_testbed", "zeta0", cfg.initial.zeta0);
  set_vector("vtol_testbed", "eta0", cfg.initial.eta0);
  set_double("vtol_testbed", "xi1_0", cfg.initial.xi1_0);
  set_double("vtol_testbed", "xi2_0", cfg.initial.xi2_0);

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open configuration file '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream& out, const ExperimentConfig& cfg) {
  const auto& p = cfg.loop;
  out << "[experiment]\n"
      << "exosystem = " << to_string(p.exosystem) << "\n"
      << "preset = " << cfg.preset << "\n"
      << "output_dir = " << cfg.output_dir << "\n"
      << "tail_fraction = " << num(cfg.tail_fraction) << "\n"
      << "gnuplot = " << (cfg.gnuplot ? "true" : "false") << "\n\n";
  out << "[gp_identifier]\n"
      << "enabled = " << (cfg.gp_enabled ? "true" : "false") << "\n"
      << "sigma_p2 = " << num(p.kernel.sigma_p2) << "\n"
      << "sigma_n2 = " << num(p.kernel.sigma_n2) << "\n"
      << "lambda_eta = " << vec(p.kernel.lambda_eta) << "\n"
      << "lambda_tau = " << num(p.kernel.lambda_tau) << "\n"
      << "sigma_thr2 = " << num(p.sigma_thr2) << "\n"
      << "n_ds = " << p.n_ds << "\n\n";
  out << "[regulator_core]\n"
      << "g = " << num(p.internal_model.g) << "\n"
      << "h = " << vec(p.internal_model.h) << "\n"
      << "l = " << num(p.stabilizer.l) << "\n"
      << "delta = " << num(p.stabilizer.delta) << "\n"
      << "c = " << vec(p.stabilizer.c.at(0)) << "\n"
      << "L = " << num(p.stabilizer.L(0, 0)) << "\n"
      << "m1 = " << num(p.observer.m1) << "\n"
      << "m2 = " << num(p.observer.m2) << "\n"
      << "rho = " << num(p.observer.rho) << "\n\n";
  out << "[baseline]\n"
      << "enabled = " << (cfg.baseline_enabled ? "true" : "false") << "\n"
      << "p0 = " << num(p.baseline.p0) << "\n"
      << "forgetting_rate = " << num(p.baseline.forgetting_rate) << "\n\n";
  out << "[hybrid_engine]\n"
      << "step_initial = " << num(cfg.sim.step_initial) << "\n"
      << "step_max = " << num(cfg.sim.step_max) << "\n"
      << "tol_rel = " << num(cfg.sim.tol_rel) << "\n"
      << "tol_abs = " << num(cfg.sim.tol_abs) << "\n"
      << "event_tol = " << num(cfg.sim.event_tol) << "\n"
      << "t_end = " << num(cfg.sim.t_end) << "\n"
      << "max_jumps = " << cfg.sim.max_jumps << "\n"
      << "record_dt = " << num(cfg.sim.record_dt) << "\n\n";
  out << "[vtol_testbed]\n"
      << "M = " << num(p.plant.M) << "\n"
      << "J = " << num(p.plant.J) << "\n"
      << "wing_l = " << num(p.plant.wing_l) << "\n"
      << "grav = " << num(p.plant.grav) << "\n"
      << "w0 = " << vec(cfg.initial.w0) << "\n"
      << "chi0 = " << vec(cfg.initial.chi0) << "\n"
      << "zeta0 = " << num(cfg.initial.zeta0) << "\n";
  if (cfg.initial.eta0.size() != 0) out << "eta0 = " << vec(cfg.initial.eta0) << "\n";
  out << "xi1_0 = " << num(cfg.initial.xi1_0) << "\n"
      << "xi2_0 = " << num(cfg.initial.xi2_0) << "\n";
}

}  // namespace gpreg
