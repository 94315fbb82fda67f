#include "lendsim/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lendsim/errors.hpp"

namespace lendsim {

PriceState step_price(const PriceState& state, const HestonParams& params, Rng& rng) {
  const double eta = rng.normal();
  double var = state.var + params.kappa * (params.theta - state.var) +
               params.xi * std::sqrt(state.var) * eta;
  var = std::max(0.0, var);  // full truncation
  const double eps = rng.normal();
  double p = state.p * std::exp(params.mu - 0.5 * var + std::sqrt(var) * eps);
  // the exponential map can underflow at extreme variance; keep p > 0
  p = std::max(p, std::numeric_limits<double>::min());
  return {p, var};
}

namespace {

// Restore positivity and the admissibility chain b_l/a_l < r_min < r_max < b_b/a_b
// with minimal movement of the rate band.
CurveParams repair(CurveParams p, const CurveParams& base) {
  p.a_b = std::max(p.a_b, 1e-6 * std::abs(base.a_b));
  p.b_b = std::max(p.b_b, 1e-6 * std::abs(base.b_b));
  p.a_l = std::max(p.a_l, 1e-6 * std::abs(base.a_l));
  p.b_l = std::max(p.b_l, 1e-6 * std::abs(base.b_l));

  double lo = p.b_l / p.a_l;
  double hi = p.b_b / p.a_b;
  if (lo >= hi) {
    // Curves incompatible; scale demand intercept up to restore a 4x gap.
    p.b_b = p.a_b * lo * 4.0;
    hi = p.b_b / p.a_b;
  }
  if (!(lo < p.r_min)) p.r_min = lo * (1.0 + 1e-6) + 1e-12;
  if (!(p.r_max < hi)) p.r_max = hi * (1.0 - 1e-6);
  if (!(p.r_min < p.r_max)) {
    const double mid = std::sqrt(std::max(lo, 1e-300) * hi);
    p.r_min = mid * (1.0 - 1e-6);
    p.r_max = mid * (1.0 + 1e-6);
  }
  return p;
}

}  // namespace

CurveParams step_params(const ParamTrajectory& traj, const CurveParams& current,
                        long block, Rng& rng) {
  switch (traj.mode) {
    case TrajectoryMode::kStatic:
      return current;
    case TrajectoryMode::kRandomWalk: {
      if (block <= 0 || block % traj.update_interval != 0) return current;
      CurveParams next = current;
      next.a_b += rng.normal(0.0, traj.sigma_trns * std::abs(current.a_b));
      next.b_b += rng.normal(0.0, traj.sigma_trns * std::abs(current.b_b));
      next.a_l += rng.normal(0.0, traj.sigma_trns * std::abs(current.a_l));
      next.b_l += rng.normal(0.0, traj.sigma_trns * std::abs(current.b_l));
      return repair(next, traj.base);
    }
    case TrajectoryMode::kReplay: {
      if (traj.replay.empty())
        throw ConfigError("replay trajectory exhausted: empty schedule");
      if (block < traj.replay.front().block)
        throw ConfigError("replay trajectory exhausted: no entry covers block " +
                          std::to_string(block));
      const ReplayEntry* entry = &traj.replay.front();
      for (const auto& e : traj.replay) {
        if (e.block <= block) entry = &e;
        else break;
      }
      CurveParams next = current;
      next.a_b = entry->a_b;
      next.b_b = entry->b_b;
      next.a_l = entry->a_l;
      next.b_l = entry->b_l;
      return repair(next, traj.base);
    }
  }
  return current;
}

double truthful_demand(const CurveParams& params, double prev_rate,
                       double prev_supply, double noise_sd, Rng& rng) {
  double b;
  if (prev_rate < params.r_min) {
    b = prev_supply;
  } else if (prev_rate <= params.r_max) {
    b = -params.a_b * prev_rate + params.b_b;
  } else {
    b = 0.0;
  }
  if (noise_sd > 0.0) b += rng.normal(0.0, noise_sd);
  return std::clamp(b, 0.0, prev_supply);
}

double truthful_supply(const CurveParams& params, double prev_rate,
                       double prev_util, double prev_borrow, double supply_cap,
                       double noise_sd, Rng& rng) {
  const double r_eff = prev_rate * prev_util;
  double l;
  if (r_eff < params.r_min) {
    l = prev_borrow;
  } else if (r_eff <= params.r_max) {
    l = params.a_l * r_eff - params.b_l;
  } else {
    l = supply_cap;
  }
  if (noise_sd > 0.0) l += rng.normal(0.0, noise_sd);
  return std::max(l, prev_borrow);
}

PoolState advance_pool(const PoolState& state, double demand, double supply,
                       double new_rate) {
  PoolState next = state;
  next.supply = supply;
  next.borrow = std::min(demand, supply);
  next.util = supply > 0.0 ? next.borrow / supply : 0.0;
  next.rate = new_rate;
  return next;
}

std::optional<double> steady_state_utilization(const CurveParams& params, double rate) {
  if (rate < params.r_min) return 1.0;
  if (rate > params.r_max) return 0.0;
  const double demand = -params.a_b * rate + params.b_b;
  if (demand < 0.0) return 0.0;
  // a_l r U^2 - b_l U - demand = 0; roots have opposite signs, take '+'.
  const double a = params.a_l * rate;
  if (a <= 0.0) return std::nullopt;
  const double disc = params.b_l * params.b_l + 4.0 * a * demand;
  if (disc < 0.0) return std::nullopt;
  const double u = (params.b_l + std::sqrt(disc)) / (2.0 * a);
  if (!(u > 0.0)) return std::nullopt;
  if (rate * u > params.r_max) return 0.0;
  return std::min(u, 1.0);
}

std::optional<PoolState> steady_state_pool(const CurveParams& params, double rate) {
  const auto u = steady_state_utilization(params, rate);
  if (!u || *u <= 0.0 || *u > 1.0) return std::nullopt;
  const double r_eff = rate * *u;
  if (r_eff < params.r_min || r_eff > params.r_max) return std::nullopt;
  const double supply = params.a_l * r_eff - params.b_l;
  if (!(supply > 0.0)) return std::nullopt;
  PoolState s;
  s.supply = supply;
  s.borrow = *u * supply;
  s.util = *u;
  s.rate = rate;
  return s;
}

}  // namespace lendsim
