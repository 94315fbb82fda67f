#pragma once

#include <array>

#include "lendsim/linalg2.hpp"

namespace lendsim {

// Regressor x = [rate, 1] for demand, [rate*util, 1] for supply; x.v1 == 1.
struct Observation {
  Vec2 x;
  double y = 0.0;
};

// M-estimate cut points, ordered xi < delta1 < delta2; all scale with the
// current noise SD estimate (1.96, 2.24, 2.576 sigma).
struct MEstimateThresholds {
  double xi = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
};

MEstimateThresholds thresholds_from_sigma(double sigma_hat);

struct AdaptiveFfConfig {
  double beta = 0.99;       // slow window, noise-variance tracker
  double xi_small = 1e-6;   // denominator regularizer
  double rho_max = 0.999;
  double rho_min = 0.5;
  // Trackers start from the first squared a-priori error after this many
  // updates; the diffuse-prior transient would otherwise pollute the slow
  // window for over a thousand blocks.
  long warmup = 10;
  // Fast window for the sigma_e / sigma_q trackers: 1 - 10*(1 - beta).
  double fast_alpha() const { return std::max(0.5, 1.0 - 10.0 * (1.0 - beta)); }
};

struct RobustConfig {
  long warmup = 20;          // plain-RLS blocks before robust weighting activates
  double scale_beta = 0.99;  // EWMA factor for the noise-scale tracker
};

// Demand curve is theta = [-a_b, b_b]; supply is theta = [a_l, -b_l].
struct EstimatorState {
  Vec2 theta{0.0, 0.0};
  Mat2 p{1e6, 0.0, 0.0, 1e6};  // diffuse prior
  double rho = 0.95;
  double noise_var_hat = 0.0;
  double q_var_hat = 0.0;  // adaptive-FF tracker of q_t^2
  double e_var_hat = 0.0;  // adaptive-FF tracker of e_t^2 (fast window)
  bool trackers_initialized = false;
  long updates = 0;
  // Warmup residuals for the robust noise-scale initializer (second half used).
  std::array<double, 32> warmup_sq_err{};

  double a_b_hat() const { return -theta.v0; }
  double b_b_hat() const { return theta.v1; }
  double a_l_hat() const { return theta.v0; }
  double b_l_hat() const { return -theta.v1; }
};

// One RLS step with the current state.rho. Throws ModelError on a non-finite
// observation. P is symmetrized after the update.
EstimatorState rls_update(const EstimatorState& state, const Observation& obs);

// Paleologu-style variable forgetting factor: updates the q/e/noise variance
// trackers, then rho = clamp(sigma_q*sigma / (xi + |sigma_e - sigma|)).
// Run before rls_update so the new rho governs the same observation.
EstimatorState adaptive_rho(const EstimatorState& state, const Observation& obs,
                            const AdaptiveFfConfig& cfg);

// dphi/de / e for the four-piece redescending M-estimate, in [0, 1].
double phi_weight(double e, const MEstimateThresholds& th);

// Outlier-robust RLS: plain updates during warmup, then the reweighted gain
// K = q(e) P x / (rho + q(e) x'Px). Fully rejected samples (q = 0) hold both
// theta and P. The noise scale only learns from residuals below delta1.
EstimatorState robust_rls_update(const EstimatorState& state, const Observation& obs,
                                 const RobustConfig& cfg = {});

}  // namespace lendsim
