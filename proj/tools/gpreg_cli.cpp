// gpreg_cli: batch runner for the VTOL regulation experiments.
//
//   gpreg_cli run <config> [--regulator gp|baseline|all] [--out DIR]
//   gpreg_cli compare <config> --against baseline [--out DIR]
//   gpreg_cli validate <config>
//   gpreg_cli presets [--dump NAME]
//
// Exit codes: 0 success, 2 invalid configuration, 3 integration failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gpreg/config.hpp"
#include "gpreg/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIntegration = 3;

void print_summary_line(const gpreg::RunSummary& s, const gpreg::ExportPaths& paths) {
  std::printf("%-8s %-8s tail_sup_e=%.6g jumps=%zu dwell_ok=%s wall=%.2fs -> %s\n",
              std::string(gpreg::to_string(s.exosystem)).c_str(), std::string(gpreg::to_string(s.kind)).c_str(),
              s.tail_sup_e, s.jump_count, s.dwell_ok ? "yes" : "no", s.wall_seconds, paths.trace.string().c_str());
  if (!s.dwell_ok) std::fprintf(stderr, "warning: dwell-time checks failed (see %s)\n", paths.summary.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GP-based adaptive internal-model regulator: VTOL experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string regulator = "all";
  std::string against;
  std::string dump;

  auto* run = app.add_subcommand("run", "simulate the configured regulator(s) and write traces");
  run->add_option("config", config_path, "configuration file")->required();
  run->add_option("--regulator", regulator, "gp, baseline or all enabled")
      ->check(CLI::IsMember({"gp", "baseline", "all"}));
  run->add_option("--out", out_dir, "output directory (overrides experiment.output_dir)");

  auto* cmp = app.add_subcommand("compare", "run GP and baseline on the same setup and report the error ratio");
  cmp->add_option("config", config_path, "configuration file")->required();
  cmp->add_option("--against", against, "comparator")->required()->check(CLI::IsMember({"baseline"}));
  cmp->add_option("--out", out_dir, "output directory (overrides experiment.output_dir)");

  auto* val = app.add_subcommand("validate", "check a configuration file without simulating");
  val->add_option("config", config_path, "configuration file")->required();

  auto* pre = app.add_subcommand("presets", "list built-in parameter presets");
  pre->add_option("--dump", dump, "print the complete configuration of a preset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      if (!dump.empty()) {
        gpreg::write_config(std::cout, gpreg::make_preset(dump));
        return 0;
      }
      for (const auto& name : gpreg::preset_names()) {
        const auto cfg = gpreg::make_preset(name);
        const auto& st = cfg.loop.stabilizer;
        std::printf("%-7s l=%g delta=%g g=%g rho=%g L=%g t_end=%g\n", name.c_str(), st.l, st.delta,
                    cfg.loop.internal_model.g, cfg.loop.observer.rho, st.L(0, 0), cfg.sim.t_end);
      }
      return 0;
    }

    gpreg::ExperimentConfig cfg = gpreg::load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (*val) {
      const auto cond = gpreg::check_sigma_condition(cfg.loop.kernel, cfg.loop.sigma_thr2);
      std::printf("ok: preset=%s exosystem=%s sigma_thr2=%g in (%.6g, %.6g)\n", cfg.preset.c_str(),
                  std::string(gpreg::to_string(cfg.loop.exosystem)).c_str(), cfg.loop.sigma_thr2, cond.lower,
                  cond.upper);
      return 0;
    }

    const std::filesystem::path dir = cfg.output_dir;
    if (*run) {
      std::vector<gpreg::RegulatorKind> kinds;
      if ((regulator == "gp" || regulator == "all") && cfg.gp_enabled) kinds.push_back(gpreg::RegulatorKind::gp);
      if ((regulator == "baseline" || regulator == "all") && cfg.baseline_enabled) {
        kinds.push_back(gpreg::RegulatorKind::baseline);
      }
      if (kinds.empty()) throw gpreg::ConfigError("", "requested regulator is disabled in the configuration");
      for (auto kind : kinds) {
        const auto result = gpreg::run_experiment(cfg, kind);
        print_summary_line(result.summary, gpreg::export_arc(result, cfg, dir, gpreg::run_stem(cfg, kind)));
      }
      return 0;
    }

    if (*cmp) {
      if (!cfg.gp_enabled || !cfg.baseline_enabled) {
        throw gpreg::ConfigError("", "compare needs both gp_identifier.enabled and baseline.enabled");
      }
      const auto gp = gpreg::run_experiment(cfg, gpreg::RegulatorKind::gp);
      print_summary_line(gp.summary, gpreg::export_arc(gp, cfg, dir, gpreg::run_stem(cfg, gpreg::RegulatorKind::gp)));
      const auto base = gpreg::run_experiment(cfg, gpreg::RegulatorKind::baseline);
      print_summary_line(base.summary,
                         gpreg::export_arc(base, cfg, dir, gpreg::run_stem(cfg, gpreg::RegulatorKind::baseline)));
      const auto report = gpreg::compare(gp, base);
      const auto path = dir / (std::string(gpreg::to_string(cfg.loop.exosystem)) + "_comparison.txt");
      std::ofstream f(path, std::ios::binary);
      gpreg::write_comparison(f, report);
      std::printf("ratio tail_sup_e(gp)/tail_sup_e(baseline) = %.6g -> %s\n", report.ratio, path.string().c_str());
      return 0;
    }
  } catch (const gpreg::ConfigError& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return kExitConfig;
  } catch (const gpreg::IntegrationError& e) {
    std::fprintf(stderr, "integration failed: %s\n", e.what());
    return kExitIntegration;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
