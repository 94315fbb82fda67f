#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lendsim/adversary.hpp"
#include "lendsim/controllers.hpp"
#include "lendsim/market.hpp"
#include "lendsim/metrics.hpp"

namespace lendsim {

struct RiskParams {
  double collateral_factor = 0.8;
  double liq_threshold = 0.9;
  double liq_incentive = 0.05;
};

struct MarketConfig {
  CurveParams curve;
  ParamTrajectory trajectory;
  HestonParams heston{0.0, 0.05, 4e-4, 0.005, 4e-4, 100.0};
  double noise_sd = 1.0;
  std::optional<double> supply_cap;  // default 100x initial supply
  RiskParams risk;
};

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::kFixed;
  double rho = 0.8;
  int lag = 1;
  AdaptiveFfConfig adaptive;
  RobustConfig robust;
};

enum class AttackKind { kNone, kIntermittent, kPersistentBorrower, kWithholding };

struct AdversaryConfig {
  AttackKind kind = AttackKind::kNone;
  IntermittentAttack intermittent;
  PersistentBorrowerAttack persistent;
  WithholdingAgent withholding;
  bool strategic = true;  // withholding only: truthful when false (paired runs)
  // Withholding world capacities; 0 means "use the initial pool state".
  double withholding_borrow = 0;
  double withholding_supply = 0;
};

struct OutputConfig {
  std::string dir = "out";
  std::string format = "csv";  // report format: csv | json
  bool write_traces = true;
};

struct ScenarioConfig {
  long horizon = 1000;
  long runs = 50;
  std::uint64_t base_seed = 42;
  MarketConfig market;
  ControllerConfig controller;
  EstimatorConfig estimator;
  AdversaryConfig adversary;
  long metric_warmup = 0;
  OutputConfig output;

  // Field-path diagnostics on violation; throws ConfigError.
  void validate() const;
};

// Mean and standard error over runs, per metric.
struct Aggregate {
  double mean = 0;
  double stderr_ = 0;
};

struct ScenarioResult {
  std::vector<MetricReport> per_run;
  std::vector<Aggregate> aggregated;  // indexed like metric_names()
};

const std::vector<std::string>& metric_names();
std::vector<double> metric_values(const MetricReport& rep);
std::vector<Aggregate> aggregate_reports(const std::vector<MetricReport>& reports);

// One seeded simulation; strictly sequential state machine.
RunTrace simulate_run(const ScenarioConfig& cfg, std::uint64_t run_index);

// All runs, optionally across a worker pool; traces returned in run order.
std::vector<RunTrace> simulate_all(const ScenarioConfig& cfg, int threads = 1);

ScenarioResult run_scenario(const ScenarioConfig& cfg, int threads = 1,
                            std::vector<RunTrace>* traces_out = nullptr);

struct AdversarialImpact {
  double measured_gap = 0;   // mean over runs of the steady-state rate gap
  double bound = 0;          // applicable theoretical ceiling
  std::string bound_name;
  std::vector<double> per_run_gap;
};

// Paired runs with common substreams; steady state is the final quarter of the
// horizon. Throws ConfigError when the horizon is under 4x the mixing window.
AdversarialImpact measure_adversarial_impact(const ScenarioConfig& cfg, int threads = 1);

}  // namespace lendsim
