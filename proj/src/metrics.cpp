#include "lendsim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "lendsim/controllers.hpp"
#include "lendsim/errors.hpp"

namespace lendsim {

void validate_trace(const RunTrace& trace) {
  if (trace.rows.empty()) throw ModelError("metrics: empty trace");
  long prev_t = trace.rows.front().t - 1;
  for (const auto& r : trace.rows) {
    if (r.t <= prev_t) throw ModelError("metrics: non-increasing t in trace");
    prev_t = r.t;
    if (!std::isfinite(r.rate) || !std::isfinite(r.util) || !std::isfinite(r.borrow) ||
        !std::isfinite(r.supply))
      throw ModelError("metrics: non-finite trace entry at t=" + std::to_string(r.t));
  }
}

double rate_deviation(const RunTrace& trace, std::span<const double> oracle_rates) {
  validate_trace(trace);
  if (oracle_rates.size() != trace.rows.size())
    throw ModelError("rate_deviation: oracle length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < trace.rows.size(); ++i)
    acc += std::abs(trace.rows[i].rate - oracle_rates[i]);
  return acc / static_cast<double>(trace.rows.size());
}

double utilization_mse(const RunTrace& trace, double target_util) {
  validate_trace(trace);
  double acc = 0.0;
  for (const auto& r : trace.rows) {
    const double d = r.util - target_util;
    acc += d * d;
  }
  return acc / static_cast<double>(trace.rows.size());
}

std::array<double, 4> param_rmse(const RunTrace& trace) {
  validate_trace(trace);
  std::array<double, 4> acc{};
  for (const auto& r : trace.rows) {
    const double da = r.a_b_hat - r.true_params.a_b;
    const double db = r.b_b_hat - r.true_params.b_b;
    const double dal = r.a_l_hat - r.true_params.a_l;
    const double dbl = r.b_l_hat - r.true_params.b_l;
    acc[0] += da * da;
    acc[1] += db * db;
    acc[2] += dal * dal;
    acc[3] += dbl * dbl;
  }
  const double n = static_cast<double>(trace.rows.size());
  for (auto& v : acc) v = std::sqrt(v / n);
  return acc;
}

std::pair<double, double> prediction_error(const RunTrace& trace) {
  validate_trace(trace);
  double abs_d = 0, abs_s = 0, mean_d = 0, mean_s = 0;
  for (const auto& r : trace.rows) {
    abs_d += std::abs(r.pred_demand - r.borrow);
    abs_s += std::abs(r.pred_supply - r.supply);
    mean_d += r.borrow;
    mean_s += r.supply;
  }
  const double n = static_cast<double>(trace.rows.size());
  return {mean_d > 0 ? (abs_d / n) / (mean_d / n) : 0.0,
          mean_s > 0 ? (abs_s / n) / (mean_s / n) : 0.0};
}

MetricReport compute_metrics(const RunTrace& trace, long warmup) {
  validate_trace(trace);
  RunTrace tail;
  tail.target_util = trace.target_util;
  for (const auto& r : trace.rows)
    if (r.t > warmup) tail.rows.push_back(r);
  if (tail.rows.empty()) throw ModelError("metrics: warmup swallows the whole trace");

  MetricReport rep;
  rep.blocks = static_cast<long>(tail.rows.size());
  double dev = 0, ndev = 0, fn_d = 0, fn_s = 0;
  long ndev_n = 0;
  for (const auto& r : tail.rows) {
    const auto& p = r.true_params;
    const double r_star =
        optimal_rate_util(p.a_b, p.b_b, p.a_l, p.b_l, trace.target_util);
    dev += std::abs(r.rate - r_star);
    if (r_star > 1e-12) {
      ndev += std::abs(r.rate - r_star) / r_star;
      ++ndev_n;
    }
    rep.mean_supply += r.supply;
    rep.mean_rate += r.rate;
    // One-step curve error at the visited regressor, against the noiseless truth.
    const double x_d = r.rate;
    const double true_d = -p.a_b * x_d + p.b_b;
    const double est_d = -r.a_b_hat * x_d + r.b_b_hat;
    fn_d += (est_d - true_d) * (est_d - true_d);
    const double x_s = r.rate * r.util;
    const double true_s = p.a_l * x_s - p.b_l;
    const double est_s = r.a_l_hat * x_s - r.b_l_hat;
    fn_s += (est_s - true_s) * (est_s - true_s);
  }
  const double n = static_cast<double>(tail.rows.size());
  rep.rate_deviation = dev / n;
  rep.normalized_rate_dev = ndev_n > 0 ? ndev / static_cast<double>(ndev_n) : 0.0;
  rep.util_mse = utilization_mse(tail, trace.target_util);
  rep.param_rmse = param_rmse(tail);
  std::tie(rep.pred_error_demand, rep.pred_error_supply) = prediction_error(tail);
  rep.demand_fn_rmse = std::sqrt(fn_d / n);
  rep.supply_fn_rmse = std::sqrt(fn_s / n);
  rep.mean_supply /= n;
  rep.mean_rate /= n;
  return rep;
}

double pool_default(std::span<const double> borrows,
                    std::span<const double> collaterals, double p_next) {
  if (borrows.size() != collaterals.size())
    throw ModelError("pool_default: user vectors misaligned");
  double acc = 0.0;
  for (std::size_t i = 0; i < borrows.size(); ++i)
    acc += std::max(0.0, borrows[i] - collaterals[i] * p_next);
  return acc;
}

double user_liquidation(double borrow_i, double collateral_i, double p_next,
                        double lt, double li) {
  const double k = lt * (1.0 + li);
  if (!(k < 1.0))
    throw ModelError("user_liquidation: LT(1+LI) >= 1, liquidation undefined");
  return std::max(0.0, (borrow_i - lt * collateral_i * p_next) / (1.0 - k));
}

}  // namespace lendsim
