#pragma once

#include <string>
#include <vector>

#include "lendsim/data.hpp"
#include "lendsim/sim.hpp"

namespace lendsim {

// Everything the subcommands write goes under cfg.output.dir; outputs are
// byte-reproducible for a fixed (config, base_seed).

struct SimulateOutput {
  ScenarioResult result;
  std::vector<std::string> files;
};

SimulateOutput cmd_simulate(const ScenarioConfig& cfg, int threads = 1);

struct SweepPoint {
  double value = 0;
  std::vector<Aggregate> aggregated;
};

struct SweepOutput {
  std::vector<SweepPoint> points;
  std::string file;
};

// axis is a dotted config path, e.g. market.trajectory.sigma_trns,
// estimator.rho, adversary.sigma_attack, adversary.gamma_adv.
SweepOutput cmd_sweep(const ScenarioConfig& cfg, const std::string& axis,
                      const std::vector<double>& values, int threads = 1);

struct AdversaryOutput {
  AdversarialImpact impact;
  std::string file;
};

AdversaryOutput cmd_adversary(const ScenarioConfig& cfg, int threads = 1);

struct RiskPoint {
  long t = 0;
  double sigma = 0;
  double collateral_factor = 0;
  double expected_liq = 0;
  bool feasible = true;
};

struct RiskOutput {
  std::vector<RiskPoint> points;
  std::string file;
};

// Volatility path from the scenario's Heston parameters (or a provided sigma
// series); per-slot collateral factor solve at the configured target.
RiskOutput cmd_risk(const ScenarioConfig& cfg, const RiskTargets& targets,
                    long horizon, const std::vector<double>* sigma_series = nullptr);

struct FitOutput {
  LagSearchResult lags;
  FitResult fit;
  std::vector<std::string> files;
};

FitOutput cmd_fit(const std::string& data_path, const std::string& out_dir,
                  double rho = 0.95, int max_delta = 30,
                  const LoadOptions& opts = {});

// Apply a sweep-axis value onto a config copy; throws ConfigError on an
// unresolvable path.
ScenarioConfig apply_axis(const ScenarioConfig& cfg, const std::string& axis,
                          double value);

// Pool-series CSV compatible with load_series, derived from a trace.
void write_series_csv(const RunTrace& trace, double slot_duration,
                      const std::string& path);
void write_trace_csv(const RunTrace& trace, const std::string& path);
RunTrace read_trace_csv(const std::string& path);

}  // namespace lendsim
