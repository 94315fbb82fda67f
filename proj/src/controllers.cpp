#include "lendsim/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "lendsim/errors.hpp"

namespace lendsim {

double optimal_rate_util(double a_b, double b_b, double a_l, double b_l,
                         double target_util) {
  const double denom = a_b + a_l * target_util * target_util;
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw ModelError("optimal_rate_util: degenerate denominator");
  const double r = (b_b + b_l * target_util) / denom;
  if (!std::isfinite(r)) throw ModelError("optimal_rate_util: non-finite rate");
  return r;
}

double rate_variance(const EstimatorState& demand, const EstimatorState& supply,
                     double target_util) {
  const double u = target_util;
  const double u2 = u * u;
  const double a_b = demand.a_b_hat(), b_b = demand.b_b_hat();
  const double a_l = supply.a_l_hat(), b_l = supply.b_l_hat();
  const double denom = a_b + a_l * u2;
  const double var_ab = demand.p.m00, var_bb = demand.p.m11;
  const double var_al = supply.p.m00, var_bl = supply.p.m11;
  const double d2 = denom * denom;
  const double num = b_b + b_l * u;
  return (var_bb + u2 * var_bl) / d2 +
         num * num / (d2 * d2) * (var_ab + u2 * u2 * var_al);
}

double sample_rate(double mean_rate, const EstimatorState& demand,
                   const EstimatorState& supply, double target_util,
                   const ControllerConfig& cfg, const RateBounds& bounds, Rng& rng) {
  double var = rate_variance(demand, supply, target_util);
  double sd = std::isfinite(var) && var > 0.0 ? std::sqrt(var) : 0.0;
  if (!std::isfinite(sd)) sd = cfg.explore_fallback_frac * std::abs(mean_rate);
  sd = std::min(sd, cfg.explore_sd_cap_frac * std::abs(mean_rate));
  const double r = sd > 0.0 ? rng.normal(mean_rate, sd) : mean_rate;
  return std::clamp(r, bounds.lo, bounds.hi);
}

double utilization_at_rate(double a_b, double b_b, double a_l, double b_l,
                           double rate) {
  const double demand = -a_b * rate + b_b;
  const double a = a_l * rate;
  const double disc = b_l * b_l + 4.0 * a * demand;
  if (disc < 0.0 || a <= 0.0)
    throw ModelError("utilization_at_rate: negative discriminant");
  return (b_l + std::sqrt(disc)) / (2.0 * a);
}

double optimal_rate_revenue(double a_b, double b_b, double a_l, double b_l,
                            double u_max) {
  if (!(a_b > 0.0) || !(a_l > 0.0))
    throw ModelError("optimal_rate_revenue: non-positive slope estimates");
  // Interior stationary point of f(r); admissibility (b_l/a_l < b_b/a_b)
  // guarantees it is positive.
  const double inner = (a_l * b_b * b_b + a_b * b_l * b_l) / (a_b * a_l * (a_b + a_l));
  const double r_unc = b_b / (2.0 * a_b) - 0.5 * std::sqrt(inner);
  const double u_unc = utilization_at_rate(a_b, b_b, a_l, b_l, r_unc);
  if (u_unc <= u_max) return r_unc;
  return optimal_rate_util(a_b, b_b, a_l, b_l, u_max);
}

double static_rate(double util, const StaticCurveParams& curve) {
  if (util <= curve.kink) return curve.r_slope1 * util / curve.kink;
  return curve.r_slope1 + curve.r_slope2 * (util - curve.kink) / (1.0 - curve.kink);
}

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double expected_default(double lt, double mu, double sigma) {
  const double d = (std::log(lt) - mu) / sigma;
  return norm_cdf(d) - std::exp(mu + 0.5 * sigma * sigma) / lt * norm_cdf(d - sigma);
}

double expected_liquidation(double lt, double c, double mu, double sigma) {
  const double d = (std::log(c / lt) - mu) / sigma;
  const double tail =
      norm_cdf(d) - lt / c * std::exp(mu + 0.5 * sigma * sigma) * norm_cdf(d - sigma);
  return tail / (1.0 - lt);
}

double solve_collateral_factor(const RiskTargets& targets, double lt, double mu,
                               double sigma) {
  const double target = targets.max_expected_liquidation;
  const double eps = 1e-9;
  double lo = eps * lt;
  double hi = lt * (1.0 - eps);
  if (expected_liquidation(lt, lo, mu, sigma) > target)
    throw InfeasibleError("solve_collateral_factor: target unattainable at c -> 0");
  if (expected_liquidation(lt, hi, mu, sigma) <= target) return hi;
  for (int i = 0; i < 200 && hi - lo > 1e-6; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (expected_liquidation(lt, mid, mu, sigma) <= target)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

Controller::Controller(const ControllerConfig& cfg, EstimatorMode est_mode,
                       double rho, const AdaptiveFfConfig& ff,
                       const RobustConfig& robust, double initial_rate,
                       const RateBounds& bounds)
    : cfg_(cfg), est_mode_(est_mode), ff_(ff), robust_(robust), bounds_(bounds),
      prev_rate_(initial_rate) {
  demand_.rho = rho;
  supply_.rho = rho;
}

double Controller::step(const PoolState& pool, Rng& rng) {
  double rate;
  if (cfg_.kind == ControllerKind::kStatic) {
    rate = static_rate(pool.util, cfg_.static_curve);
  } else {
    double mean;
    try {
      if (cfg_.kind == ControllerKind::kRlsRevenue) {
        mean = optimal_rate_revenue(demand_.a_b_hat(), demand_.b_b_hat(),
                                    supply_.a_l_hat(), supply_.b_l_hat(),
                                    cfg_.u_max);
      } else {
        mean = optimal_rate_util(demand_.a_b_hat(), demand_.b_b_hat(),
                                 supply_.a_l_hat(), supply_.b_l_hat(),
                                 cfg_.target_util);
      }
    } catch (const ModelError&) {
      mean = prev_rate_;
    }
    if (cfg_.explore) {
      rate = sample_rate(mean, demand_, supply_, cfg_.target_util, cfg_, bounds_, rng);
    } else {
      rate = mean;
    }
  }
  rate = std::clamp(rate, bounds_.lo, bounds_.hi);
  prev_rate_ = rate;
  return rate;
}

void Controller::observe(const Observation& demand_obs, const Observation& supply_obs) {
  switch (est_mode_) {
    case EstimatorMode::kFixed:
      demand_ = rls_update(demand_, demand_obs);
      supply_ = rls_update(supply_, supply_obs);
      break;
    case EstimatorMode::kAdaptive:
      demand_ = rls_update(adaptive_rho(demand_, demand_obs, ff_), demand_obs);
      supply_ = rls_update(adaptive_rho(supply_, supply_obs, ff_), supply_obs);
      break;
    case EstimatorMode::kRobust:
      demand_ = robust_rls_update(demand_, demand_obs, robust_);
      supply_ = robust_rls_update(supply_, supply_obs, robust_);
      break;
  }
}

}  // namespace lendsim
