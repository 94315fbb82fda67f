#pragma once

#include <optional>
#include <vector>

#include "lendsim/rng.hpp"

namespace lendsim {

// Heston-style price state: p > 0, var >= 0 (variance is clamped at zero).
struct PriceState {
  double p = 100.0;
  double var = 0.0;
};

struct HestonParams {
  double mu = 0.0;     // drift per block
  double kappa = 0.0;  // mean reversion rate
  double theta = 0.0;  // long-term variance mean
  double xi = 0.0;     // volatility of volatility
  double var0 = 0.0;
  double p0 = 100.0;
};

// Demand -a_b r + b_b on [r_min, r_max]; supply a_l (r U) - b_l on the same
// band of the effective rate. Admissible iff b_l/a_l < r_min < r_max < b_b/a_b.
struct CurveParams {
  double a_b = 10.0;
  double b_b = 5000.0;
  double a_l = 500.0;
  double b_l = 50.0;
  double r_min = 1.0;
  double r_max = 400.0;

  bool admissible() const {
    return a_b > 0 && b_b > 0 && a_l > 0 && b_l > 0 &&
           b_l / a_l < r_min && r_min < r_max && r_max < b_b / a_b;
  }
};

enum class TrajectoryMode { kStatic, kRandomWalk, kReplay };

// Replay rows are step-function breakpoints: row i applies from `block` until
// the next breakpoint; the last row holds to the horizon.
struct ReplayEntry {
  long block = 0;
  double a_b = 0, b_b = 0, a_l = 0, b_l = 0;
};

struct ParamTrajectory {
  TrajectoryMode mode = TrajectoryMode::kStatic;
  long update_interval = 25;  // T, blocks between jumps
  double sigma_trns = 0.0;    // relative SD of each jump
  CurveParams base;
  std::vector<ReplayEntry> replay;
};

struct PoolState {
  double borrow = 0.0;
  double supply = 0.0;
  double util = 0.0;
  double rate = 0.0;
  double collateral_factor = 0.8;
  double liq_threshold = 0.9;
  double liq_incentive = 0.05;
  PriceState price;
};

// Variance then price; the updated variance (clamped at 0) feeds the price step.
// Draw order is eta (variance) then eps (price).
PriceState step_price(const PriceState& state, const HestonParams& params, Rng& rng);

// Random-walk mode perturbs each of a_b, b_b, a_l, b_l by N(0, sigma_trns*|param|)
// every update_interval blocks (draw order a_b, b_b, a_l, b_l), then restores
// positivity and band admissibility. Throws ConfigError on a bad replay schedule.
CurveParams step_params(const ParamTrajectory& traj, const CurveParams& current,
                        long block, Rng& rng);

// Eq.-style three-branch responses with additive noise and the pool clamps.
double truthful_demand(const CurveParams& params, double prev_rate,
                       double prev_supply, double noise_sd, Rng& rng);
double truthful_supply(const CurveParams& params, double prev_rate,
                       double prev_util, double prev_borrow, double supply_cap,
                       double noise_sd, Rng& rng);

// Block transition: B = min(demand, supply), L = supply, U = B/L (0 when L = 0).
PoolState advance_pool(const PoolState& state, double demand, double supply,
                       double new_rate);

// Noise-free steady-state utilization at a constant rate: the '+' root of
// a_l r U^2 - b_l U - (b_b - a_b r) = 0 in-band, 1 below the band, 0 above.
// Returns nullopt when no admissible fixed point exists at this rate.
std::optional<double> steady_state_utilization(const CurveParams& params, double rate);

// Pool state consistent with a constant rate (noise-free fixed point).
std::optional<PoolState> steady_state_pool(const CurveParams& params, double rate);

}  // namespace lendsim
