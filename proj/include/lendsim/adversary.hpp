#pragma once

#include <utility>

#include "lendsim/controllers.hpp"
#include "lendsim/market.hpp"
#include "lendsim/rng.hpp"

namespace lendsim {

// Randomly activated extra demand/supply noise, SD = sigma_attack * quantity.
struct IntermittentAttack {
  double activation_prob = 0.1;
  double sigma_attack = 1.0;
};

// Borrower misreporting: demand slope inflated to gamma_adv * a_b while active.
struct PersistentBorrowerAttack {
  double activation_prob = 0.01;
  long duration = 100;  // T_attack
  double gamma_adv = 2.0;
};

struct PersistentAttackState {
  long remaining = 0;
  bool active() const { return remaining > 0; }
};

// One uniform draw decides activation; two normal draws apply when active.
std::pair<double, double> apply_intermittent(const IntermittentAttack& attack,
                                             double demand, double supply, Rng& rng);

PersistentAttackState step_persistent(const PersistentBorrowerAttack& attack,
                                      PersistentAttackState state, Rng& rng);

// Effective demand parameters; the true params are returned untouched when idle.
CurveParams apply_persistent_borrower(const PersistentBorrowerAttack& attack,
                                      const CurveParams& params,
                                      const PersistentAttackState& state);

enum class Side { kBorrower, kLender };

struct WithholdingAgent {
  Side side = Side::kLender;
  double share = 0.1;          // delta, fraction of total supply or demand
  double external_rate = 0.0;  // r_o
};

// Steeper-branch linearization of the static curve: rate = alpha * U + beta.
double steeper_slope(const StaticCurveParams& curve);
double steeper_intercept(const StaticCurveParams& curve);

// Simplified utilities from the withholding analysis (the brute-force oracles
// grid these same functions).
double lender_utility(const WithholdingAgent& agent, double deposit, double borrow,
                      double supply, const StaticCurveParams& curve);
double borrower_utility(const WithholdingAgent& agent, double borrowed, double borrow,
                        double supply, const StaticCurveParams& curve);

// Truthful participation under the linearized curve.
double truthful_deposit(const WithholdingAgent& agent, double borrow, double supply,
                        const StaticCurveParams& curve);
double truthful_borrow(const WithholdingAgent& agent, double borrow, double supply,
                       const StaticCurveParams& curve);

// Closed-form optima, clamped to [0, share * total]. Outside the attack-relevant
// regime these coincide with truthful participation.
double withholding_optimum_lender(const WithholdingAgent& agent, double borrow,
                                  double supply, const StaticCurveParams& curve);
double withholding_optimum_borrower(const WithholdingAgent& agent, double borrow,
                                    double supply, const StaticCurveParams& curve);

// |r_strategic - r_truthful| under the linearized closed loop.
double withholding_manipulation(const WithholdingAgent& agent, double borrow,
                                double supply, const StaticCurveParams& curve);

// Theorem-style manipulation ceilings for the static curve.
double withholding_bound_lender(double borrow, double supply, double share,
                                const StaticCurveParams& curve);
double withholding_bound_borrower(double borrow, double supply, double share,
                                  const StaticCurveParams& curve);

}  // namespace lendsim
