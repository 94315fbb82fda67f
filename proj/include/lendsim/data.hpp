#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lendsim/estimators.hpp"

namespace lendsim {

// Input schema (header required, extra columns rejected):
//   timestamp,borrow_total,supply_total,borrow_rate,supply_rate,utilization
// timestamp in seconds, strictly increasing; totals in asset units; rates per
// slot; utilization in [0,1]. supply_rate and utilization may be empty.
struct PoolSeriesRow {
  double timestamp = 0;
  double borrow_total = 0;
  double supply_total = 0;
  double borrow_rate = 0;
  double supply_rate = 0;
  double utilization = 0;
  bool has_supply_rate = false;
};

struct PoolSeries {
  std::vector<PoolSeriesRow> rows;
  double slot_duration = 10800;  // 3-hour slots
};

struct LoadOptions {
  double slot_duration = 10800;
  bool error_on_gap = false;  // otherwise forward-fill missing slots
};

// Validated series; rows violating invariants abort with the offending row
// number. Gaps are resampled onto the slot grid by forward fill.
PoolSeries load_series(const std::string& path, const LoadOptions& opts = {});

struct LagSearchResult {
  std::vector<double> demand_mse;  // indexed by delta - min_delta
  std::vector<double> supply_mse;
  int min_delta = 1;
  int best_delta_demand = 1;
  int best_delta_supply = 1;
};

// One-step MSE of RLS predictions per candidate lag; ties break to the
// smallest delta. Requires series length > max_delta + warmup.
LagSearchResult lag_search(const PoolSeries& series, double rho = 0.95,
                           int min_delta = 1, int max_delta = 30, int warmup = 50);

struct FitReport {
  double demand_norm_error = 0;  // mean |y_hat - y| / mean y, slot-weighted
  double supply_norm_error = 0;
  long slots = 0;
};

struct FitTrajectoryRow {
  double timestamp = 0;
  double a_b_hat = 0, b_b_hat = 0, a_l_hat = 0, b_l_hat = 0;
  double p_b_00 = 0, p_b_11 = 0, p_l_00 = 0, p_l_11 = 0;
};

struct FitResult {
  FitReport report;
  std::vector<FitTrajectoryRow> trajectory;
};

// RLS fit at the given lags; emits the per-slot parameter trajectory and the
// normalized prediction errors (excluding the warmup window).
FitResult fit_series(const PoolSeries& series, int delta_demand, int delta_supply,
                     double rho, int warmup = 50);

void write_fit_trajectory(const FitResult& fit, const std::string& path);

}  // namespace lendsim
