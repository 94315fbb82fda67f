#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lendsim/commands.hpp"
#include "lendsim/config.hpp"
#include "lendsim/errors.hpp"

namespace {

using namespace lendsim;

ScenarioConfig load_with_overrides(const std::string& config_path, long seed,
                                   long runs, const std::string& out_dir,
                                   const std::string& format) {
  ScenarioConfig cfg =
      config_path.empty() ? ScenarioConfig{} : load_config_file(config_path);
  if (seed >= 0) cfg.base_seed = static_cast<std::uint64_t>(seed);
  if (runs > 0) cfg.runs = runs;
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  if (!format.empty()) cfg.output.format = format;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive lending-pool simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, format;
  long seed = -1, runs = 0;
  int threads = 1;
  app.add_option("--config", config_path, "Scenario config JSON");
  app.add_option("--seed", seed, "Override base seed");
  app.add_option("--runs", runs, "Override run count");
  app.add_option("--out-dir", out_dir, "Override output directory");
  app.add_option("--threads", threads, "Worker threads for independent runs");
  app.add_option("--format", format, "Report format: csv or json")
      ->check(CLI::IsMember({"csv", "json", ""}));

  auto* sim = app.add_subcommand("simulate", "Run a scenario and write traces + report");

  auto* sweep = app.add_subcommand("sweep", "Sweep one config axis");
  std::string axis;
  std::vector<double> values;
  sweep->add_option("--axis", axis, "Config path, e.g. market.trajectory.sigma_trns")
      ->required();
  sweep->add_option("--values", values, "Axis values")->required()->expected(-1);

  auto* adv = app.add_subcommand("adversary", "Paired truthful/strategic runs");

  auto* risk = app.add_subcommand("risk", "Collateral-factor trajectory for a volatility path");
  double target_liq = 0.01;
  double lt = 0.0;
  long risk_horizon = 500;
  risk->add_option("--target-liq", target_liq, "Expected-liquidation target");
  risk->add_option("--lt", lt, "Fixed liquidation threshold (default: config)");
  risk->add_option("--horizon", risk_horizon, "Volatility path length");

  auto* fit = app.add_subcommand("fit", "Lag search + RLS fit of a pool-series CSV");
  std::string data_path;
  double fit_rho = 0.95;
  int fit_max_delta = 30;
  bool error_on_gap = false;
  fit->add_option("--data", data_path, "Pool series CSV")->required();
  fit->add_option("--rho", fit_rho, "Forgetting factor");
  fit->add_option("--max-delta", fit_max_delta, "Largest candidate lag");
  fit->add_flag("--error-on-gap", error_on_gap, "Reject gaps instead of forward-filling");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto cfg = load_with_overrides(config_path, seed, runs, out_dir, format);
      const auto out = cmd_simulate(cfg, threads);
      std::printf("simulate: %ld runs, %zu files under %s\n", cfg.runs,
                  out.files.size(), cfg.output.dir.c_str());
    } else if (*sweep) {
      const auto cfg = load_with_overrides(config_path, seed, runs, out_dir, format);
      const auto out = cmd_sweep(cfg, axis, values, threads);
      std::printf("sweep: %zu points -> %s\n", out.points.size(), out.file.c_str());
    } else if (*adv) {
      const auto cfg = load_with_overrides(config_path, seed, runs, out_dir, format);
      const auto out = cmd_adversary(cfg, threads);
      std::printf("adversary: measured gap %.6g vs %s bound %.6g -> %s\n",
                  out.impact.measured_gap, out.impact.bound_name.c_str(),
                  out.impact.bound, out.file.c_str());
    } else if (*risk) {
      auto cfg = load_with_overrides(config_path, seed, runs, out_dir, format);
      RiskTargets targets;
      targets.max_expected_liquidation = target_liq;
      if (lt > 0) targets.lt_fixed = lt;
      const auto out = cmd_risk(cfg, targets, risk_horizon);
      std::printf("risk: %zu slots -> %s\n", out.points.size(), out.file.c_str());
    } else if (*fit) {
      LoadOptions opts;
      opts.error_on_gap = error_on_gap;
      const std::string dir = out_dir.empty() ? "out" : out_dir;
      const auto out = cmd_fit(data_path, dir, fit_rho, fit_max_delta, opts);
      std::printf("fit: delta_demand=%d delta_supply=%d demand_err=%.4g supply_err=%.4g\n",
                  out.lags.best_delta_demand, out.lags.best_delta_supply,
                  out.fit.report.demand_norm_error, out.fit.report.supply_norm_error);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
