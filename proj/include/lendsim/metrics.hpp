#pragma once

#include <array>
#include <span>
#include <vector>

#include "lendsim/market.hpp"

namespace lendsim {

// One row per block; `util` etc. are the post-transition state produced by the
// block's rate, `true_params` the parameters that generated the responses.
struct TraceRow {
  long t = 0;
  double rate = 0, util = 0, borrow = 0, supply = 0, price = 0;
  double collateral_factor = 0, liq_threshold = 0;
  double a_b_hat = 0, b_b_hat = 0, a_l_hat = 0, b_l_hat = 0;
  double rho = 0;
  double p_b_00 = 0, p_b_11 = 0, p_l_00 = 0, p_l_11 = 0;
  double pred_demand = 0, pred_supply = 0;
  CurveParams true_params;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  double target_util = 0.7;
};

struct MetricReport {
  double rate_deviation = 0;
  double util_mse = 0;
  double normalized_rate_dev = 0;
  std::array<double, 4> param_rmse{};  // a_b, b_b, a_l, b_l
  double pred_error_demand = 0;
  double pred_error_supply = 0;
  double demand_fn_rmse = 0;  // estimated demand curve at visited regressors
  double supply_fn_rmse = 0;
  double mean_supply = 0;
  double mean_rate = 0;
  long blocks = 0;
};

// Throws ModelError on an empty/invalid trace (non-monotone t, non-finite).
void validate_trace(const RunTrace& trace);

double rate_deviation(const RunTrace& trace, std::span<const double> oracle_rates);
double utilization_mse(const RunTrace& trace, double target_util);
std::array<double, 4> param_rmse(const RunTrace& trace);
// Normalized one-step prediction errors: mean |y_hat - y| / mean y, per curve.
std::pair<double, double> prediction_error(const RunTrace& trace);

// All metrics over the trace; r*_t comes from the recorded true params.
MetricReport compute_metrics(const RunTrace& trace, long warmup = 0);

// Sum of per-user shortfalls max(0, B_i - C_i p).
double pool_default(std::span<const double> borrows,
                    std::span<const double> collaterals, double p_next);

// Smallest x >= 0 restoring (B - x)/(C p - x(1+LI)) <= LT; requires LT(1+LI) < 1.
double user_liquidation(double borrow_i, double collateral_i, double p_next,
                        double lt, double li);

}  // namespace lendsim
