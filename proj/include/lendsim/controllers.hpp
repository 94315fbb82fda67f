#pragma once

#include <optional>

#include "lendsim/estimators.hpp"
#include "lendsim/market.hpp"
#include "lendsim/rng.hpp"

namespace lendsim {

struct RateBounds {
  double lo = 0.0;
  double hi = 0.0;
};

enum class ControllerKind { kRlsUtil, kRlsRevenue, kStatic };
enum class EstimatorMode { kFixed, kAdaptive, kRobust };

// Piecewise linear baseline: r_slope1 * U/kink below the kink,
// r_slope1 + r_slope2 * (U - kink)/(1 - kink) above.
struct StaticCurveParams {
  double r_slope1 = 0.04;
  double r_slope2 = 0.6;
  double kink = 0.8;
};

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kRlsUtil;
  double target_util = 0.7;
  double u_max = 0.9;  // revenue mode utilization ceiling
  bool explore = true;
  RateBounds rate_bounds{0.0, 0.0};  // hi <= lo means "derive from the curve band"
  // Exploration tempering; the diffuse prior otherwise emits unbounded rates.
  double explore_sd_cap_frac = 0.5;
  double explore_fallback_frac = 0.1;
  StaticCurveParams static_curve;
};

struct RiskTargets {
  double max_expected_default = 1.0;
  double max_expected_liquidation = 1.0;
  std::optional<double> lt_fixed;
};

// Eq.-9 rate: (b_b + b_l U*) / (a_b + a_l U*^2). Throws ModelError when the
// denominator is not strictly positive (estimates unusable).
double optimal_rate_util(double a_b, double b_b, double a_l, double b_l,
                         double target_util);

// Delta-method variance of the Eq.-9 rate from the covariance diagonals.
double rate_variance(const EstimatorState& demand, const EstimatorState& supply,
                     double target_util);

// Gaussian exploration around mean_rate with the delta-method SD, clamped to
// bounds. SD is capped at explore_sd_cap_frac * |mean|.
double sample_rate(double mean_rate, const EstimatorState& demand,
                   const EstimatorState& supply, double target_util,
                   const ControllerConfig& cfg, const RateBounds& bounds, Rng& rng);

// Revenue-maximizing rate: interior stationary point of
// f(r) = -a_b r + b_b - b_l/2 + sqrt(b_l^2 - 4 a_l r (a_b r - b_b))/2,
// or the U = u_max rate when the interior optimum violates the ceiling.
// Throws ModelError on negative discriminant at the candidate.
double optimal_rate_revenue(double a_b, double b_b, double a_l, double b_l,
                            double u_max);

// Utilization implied by a rate under the noise-free model ('+' root).
double utilization_at_rate(double a_b, double b_b, double a_l, double b_l, double rate);

double static_rate(double util, const StaticCurveParams& curve);

// Expected default fraction per unit borrowed for a position at LTV = lt,
// under log(p_next/p) ~ N(mu, sigma^2).
double expected_default(double lt, double mu, double sigma);

// Expected liquidation fraction per unit borrowed for a position opened at
// LTV = c with threshold lt and zero liquidation incentive.
double expected_liquidation(double lt, double c, double mu, double sigma);

// Largest c in (0, lt) with expected_liquidation <= target, bisection to 1e-6.
// Throws InfeasibleError when even c -> 0 violates the target.
double solve_collateral_factor(const RiskTargets& targets, double lt, double mu,
                               double sigma);

// One controller instance per simulation run; owns the estimator states.
class Controller {
 public:
  Controller(const ControllerConfig& cfg, EstimatorMode est_mode, double rho,
             const AdaptiveFfConfig& ff, const RobustConfig& robust,
             double initial_rate, const RateBounds& bounds);

  // Sets the block's rate from the pool state and current estimates; on
  // estimator errors holds the previous rate.
  double step(const PoolState& pool, Rng& rng);

  // Feed the realized demand/supply responses.
  void observe(const Observation& demand_obs, const Observation& supply_obs);

  const EstimatorState& demand_estimator() const { return demand_; }
  const EstimatorState& supply_estimator() const { return supply_; }
  bool uses_estimators() const { return cfg_.kind != ControllerKind::kStatic; }
  double prev_rate() const { return prev_rate_; }

 private:
  ControllerConfig cfg_;
  EstimatorMode est_mode_;
  AdaptiveFfConfig ff_;
  RobustConfig robust_;
  RateBounds bounds_;
  EstimatorState demand_;
  EstimatorState supply_;
  double prev_rate_;
};

}  // namespace lendsim
