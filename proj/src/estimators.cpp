#include "lendsim/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lendsim/errors.hpp"

namespace lendsim {

MEstimateThresholds thresholds_from_sigma(double sigma_hat) {
  return {1.96 * sigma_hat, 2.24 * sigma_hat, 2.576 * sigma_hat};
}

namespace {

// Consistency factors for Gaussian noise: med(e^2) = 0.4549 sigma^2, and
// E[e^2 | |e| < 2.24 sigma] = 0.8508 sigma^2.
constexpr double kMedianChi2Inv = 2.19813;
constexpr double kTruncationCorr = 1.17531;

void check_finite(const Observation& obs) {
  if (!std::isfinite(obs.x.v0) || !std::isfinite(obs.x.v1) || !std::isfinite(obs.y))
    throw ModelError("estimator: non-finite observation rejected");
}

// Shared gain/covariance step; weight = 1 is plain RLS.
EstimatorState weighted_update(const EstimatorState& state, const Observation& obs,
                               double weight) {
  EstimatorState next = state;
  const double e = obs.y - dot(obs.x, state.theta);
  const Vec2 px = mul(state.p, obs.x);
  const double denom = state.rho + weight * dot(obs.x, px);
  const Vec2 k = (weight / denom) * px;
  next.theta = state.theta + e * k;
  const Mat2 ik = identity2() - outer(k, obs.x);
  next.p = symmetrize((1.0 / state.rho) * matmul(ik, state.p));
  next.updates = state.updates + 1;
  return next;
}

}  // namespace

EstimatorState rls_update(const EstimatorState& state, const Observation& obs) {
  check_finite(obs);
  return weighted_update(state, obs, 1.0);
}

EstimatorState adaptive_rho(const EstimatorState& state, const Observation& obs,
                            const AdaptiveFfConfig& cfg) {
  check_finite(obs);
  if (state.updates < cfg.warmup) return state;
  EstimatorState next = state;
  const double e = obs.y - dot(obs.x, state.theta);
  const double q = dot(obs.x, mul(state.p, obs.x));
  const double e2 = e * e;
  const double q2 = q * q;
  if (!state.trackers_initialized) {
    next.e_var_hat = e2;
    next.noise_var_hat = e2;
    next.q_var_hat = q2;
    next.trackers_initialized = true;
  } else {
    const double alpha = cfg.fast_alpha();
    next.e_var_hat = alpha * state.e_var_hat + (1.0 - alpha) * e2;
    next.q_var_hat = alpha * state.q_var_hat + (1.0 - alpha) * q2;
    next.noise_var_hat = cfg.beta * state.noise_var_hat + (1.0 - cfg.beta) * e2;
  }
  const double sigma_q = std::sqrt(std::max(0.0, next.q_var_hat));
  const double sigma_e = std::sqrt(std::max(0.0, next.e_var_hat));
  const double sigma = std::sqrt(std::max(0.0, next.noise_var_hat));
  const double rho = sigma_q * sigma / (cfg.xi_small + std::abs(sigma_e - sigma));
  next.rho = std::clamp(rho, cfg.rho_min, cfg.rho_max);
  return next;
}

double phi_weight(double e, const MEstimateThresholds& th) {
  const double ae = std::abs(e);
  if (ae < th.xi) return 1.0;
  if (ae < th.delta1) return th.xi / ae;
  if (ae < th.delta2) {
    const double w = 2.0 * th.xi * (ae - th.delta2) / ((th.delta1 - th.delta2) * ae);
    return std::clamp(w, 0.0, 1.0);
  }
  return 0.0;
}

EstimatorState robust_rls_update(const EstimatorState& state, const Observation& obs,
                                 const RobustConfig& cfg) {
  check_finite(obs);
  const double e = obs.y - dot(obs.x, state.theta);
  const double e2 = e * e;

  if (state.updates < cfg.warmup) {
    EstimatorState next = weighted_update(state, obs, 1.0);
    const auto slot = static_cast<std::size_t>(state.updates) % next.warmup_sq_err.size();
    next.warmup_sq_err[slot] = e2;
    if (next.updates == cfg.warmup) {
      // Scale initializer: median of the second half of the warmup residuals;
      // the first half holds the diffuse-prior transient, and the median keeps
      // warmup-window outliers out of the scale.
      const long lo = cfg.warmup / 2;
      std::vector<double> tail;
      for (long i = lo; i < cfg.warmup; ++i)
        tail.push_back(
            next.warmup_sq_err[static_cast<std::size_t>(i) % next.warmup_sq_err.size()]);
      std::nth_element(tail.begin(), tail.begin() + tail.size() / 2, tail.end());
      next.noise_var_hat = kMedianChi2Inv * tail[tail.size() / 2];
    }
    return next;
  }

  const double sigma = std::sqrt(std::max(0.0, state.noise_var_hat));
  const auto th = thresholds_from_sigma(sigma);
  const double w = phi_weight(e, th);
  EstimatorState next = w > 0.0 ? weighted_update(state, obs, w) : state;
  if (w <= 0.0) next.updates = state.updates + 1;  // rejected: hold theta and P
  if (std::abs(e) < th.delta1)
    next.noise_var_hat = cfg.scale_beta * state.noise_var_hat +
                         (1.0 - cfg.scale_beta) * kTruncationCorr * e2;
  return next;
}

}  // namespace lendsim
