#include "lendsim/adversary.hpp"

#include <algorithm>
#include <cmath>

namespace lendsim {

std::pair<double, double> apply_intermittent(const IntermittentAttack& attack,
                                             double demand, double supply, Rng& rng) {
  if (attack.activation_prob <= 0.0) return {demand, supply};
  if (rng.uniform01() >= attack.activation_prob) return {demand, supply};
  if (attack.sigma_attack <= 0.0) return {demand, supply};
  const double d = demand + rng.normal(0.0, std::abs(demand) * attack.sigma_attack);
  const double s = supply + rng.normal(0.0, std::abs(supply) * attack.sigma_attack);
  return {d, s};
}

PersistentAttackState step_persistent(const PersistentBorrowerAttack& attack,
                                      PersistentAttackState state, Rng& rng) {
  if (state.active()) {
    --state.remaining;
    return state;
  }
  if (rng.uniform01() < attack.activation_prob) state.remaining = attack.duration;
  return state;
}

CurveParams apply_persistent_borrower(const PersistentBorrowerAttack& attack,
                                      const CurveParams& params,
                                      const PersistentAttackState& state) {
  if (!state.active()) return params;
  CurveParams effective = params;
  effective.a_b = params.a_b * attack.gamma_adv;
  return effective;
}

double steeper_slope(const StaticCurveParams& curve) {
  return curve.r_slope2 / (1.0 - curve.kink);
}

double steeper_intercept(const StaticCurveParams& curve) {
  return curve.r_slope1 - curve.r_slope2 * curve.kink / (1.0 - curve.kink);
}

double lender_utility(const WithholdingAgent& agent, double deposit, double borrow,
                      double supply, const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  const double pool = supply * (1.0 - agent.share) + deposit;
  const double rate = alpha * borrow / pool + beta;
  return deposit * rate + (agent.share * supply - deposit) * agent.external_rate;
}

double borrower_utility(const WithholdingAgent& agent, double borrowed, double borrow,
                        double supply, const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  const double util = (borrow * (1.0 - agent.share) + borrowed) / supply;
  const double rate = alpha * util + beta;
  return -borrowed * rate - (agent.share * borrow - borrowed) * agent.external_rate;
}

double truthful_deposit(const WithholdingAgent& agent, double borrow, double supply,
                        const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  const double cap = agent.share * supply;
  // Largest deposit keeping the pool rate at or above the external rate.
  const double full = alpha * borrow / (supply * (1.0 - agent.share) + cap) + beta;
  if (full >= agent.external_rate) return cap;
  if (agent.external_rate <= beta) return cap;
  const double d = alpha * borrow / (agent.external_rate - beta) -
                   supply * (1.0 - agent.share);
  return std::clamp(d, 0.0, cap);
}

double truthful_borrow(const WithholdingAgent& agent, double borrow, double supply,
                       const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  const double cap = agent.share * borrow;
  const double full = alpha * (borrow * (1.0 - agent.share) + cap) / supply + beta;
  if (full <= agent.external_rate) return cap;
  const double b = supply * (agent.external_rate - beta) / alpha -
                   borrow * (1.0 - agent.share);
  return std::clamp(b, 0.0, cap);
}

double withholding_optimum_lender(const WithholdingAgent& agent, double borrow,
                                  double supply, const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  const double cap = agent.share * supply;
  if (agent.external_rate <= beta) return cap;  // pool always beats outside
  const double rest = supply * (1.0 - agent.share);
  const double opt =
      -rest + std::sqrt(alpha * borrow * rest / (agent.external_rate - beta));
  return std::clamp(opt, 0.0, cap);
}

double withholding_optimum_borrower(const WithholdingAgent& agent, double borrow,
                                    double supply, const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  const double cap = agent.share * borrow;
  const double opt = (agent.external_rate - beta) * supply / (2.0 * alpha) -
                     borrow * (1.0 - agent.share) / 2.0;
  return std::clamp(opt, 0.0, cap);
}

double withholding_manipulation(const WithholdingAgent& agent, double borrow,
                                double supply, const StaticCurveParams& curve) {
  const double alpha = steeper_slope(curve);
  const double beta = steeper_intercept(curve);
  double u_strategic, u_truthful;
  if (agent.side == Side::kLender) {
    const double rest = supply * (1.0 - agent.share);
    u_strategic =
        borrow / (rest + withholding_optimum_lender(agent, borrow, supply, curve));
    u_truthful = borrow / (rest + truthful_deposit(agent, borrow, supply, curve));
  } else {
    const double rest = borrow * (1.0 - agent.share);
    u_strategic =
        (rest + withholding_optimum_borrower(agent, borrow, supply, curve)) / supply;
    u_truthful = (rest + truthful_borrow(agent, borrow, supply, curve)) / supply;
  }
  const double r_strategic = alpha * u_strategic + beta;
  const double r_truthful = alpha * u_truthful + beta;
  return std::abs(r_strategic - r_truthful);
}

double withholding_bound_lender(double borrow, double supply, double share,
                                const StaticCurveParams& curve) {
  return borrow * share * curve.r_slope2 /
         (supply * (1.0 - share) * (1.0 - curve.kink));
}

double withholding_bound_borrower(double borrow, double supply, double share,
                                  const StaticCurveParams& curve) {
  return borrow * share * curve.r_slope2 / (supply * (1.0 - curve.kink));
}

}  // namespace lendsim
