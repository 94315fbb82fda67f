#include <doctest.h>

#include <cmath>
#include <vector>

#include "lendsim/errors.hpp"
#include "lendsim/estimators.hpp"
#include "lendsim/rng.hpp"

using namespace lendsim;

namespace {

// Weighted batch least squares including the RLS prior term rho^T P0^-1,
// which the recursion solves exactly in exact arithmetic.
Vec2 batch_wls(const std::vector<Observation>& obs, double rho, double p0 = 1e6) {
  const std::size_t n = obs.size();
  Mat2 m{};
  Vec2 b{};
  double w = 1.0;  // rho^(T - tau), built backwards
  for (std::size_t i = n; i-- > 0;) {
    const auto& o = obs[i];
    m = m + w * outer(o.x, o.x);
    b = b + w * Vec2{o.x.v0 * o.y, o.x.v1 * o.y};
    w *= rho;
  }
  const double prior = std::pow(rho, static_cast<double>(n)) / p0;
  m.m00 += prior;
  m.m11 += prior;
  return solve2(m, b);
}

EstimatorState run_rls(const std::vector<Observation>& obs, double rho) {
  EstimatorState st;
  st.rho = rho;
  for (const auto& o : obs) st = rls_update(st, o);
  return st;
}

}  // namespace

TEST_CASE("rls_update: zero innovation leaves the estimate fixed") {
  EstimatorState st;
  st.theta = {-10.0, 5000.0};
  st.rho = 0.9;
  const Observation obs{{20.0, 1.0}, dot({20.0, 1.0}, st.theta)};
  const auto next = rls_update(st, obs);
  CHECK(next.theta.v0 == st.theta.v0);
  CHECK(next.theta.v1 == st.theta.v1);
  // covariance still contracts along x and inflates by 1/rho
  CHECK(next.p.m11 != st.p.m11);
}

TEST_CASE("rls_update: rejects non-finite observations") {
  EstimatorState st;
  CHECK_THROWS_AS(rls_update(st, {{1.0, 1.0}, std::nan("")}), ModelError);
  CHECK_THROWS_AS(
      rls_update(st, {{std::numeric_limits<double>::infinity(), 1.0}, 0.0}),
      ModelError);
}

TEST_CASE("rls_update: two noise-free points recover the line") {
  const Vec2 truth{-10.0, 5000.0};
  std::vector<Observation> obs = {{{10.0, 1.0}, dot({10.0, 1.0}, truth)},
                                  {{25.0, 1.0}, dot({25.0, 1.0}, truth)}};
  EstimatorState st;
  st.rho = 1.0;
  for (const auto& o : obs) st = rls_update(st, o);
  const Vec2 batch = solve2(outer(obs[0].x, obs[0].x) + outer(obs[1].x, obs[1].x),
                            {obs[0].x.v0 * obs[0].y + obs[1].x.v0 * obs[1].y,
                             obs[0].x.v1 * obs[0].y + obs[1].x.v1 * obs[1].y});
  CHECK(st.theta.v0 == doctest::Approx(batch.v0).epsilon(1e-3));
  CHECK(st.theta.v1 == doctest::Approx(batch.v1).epsilon(1e-3));
  CHECK(st.theta.v0 == doctest::Approx(truth.v0).epsilon(1e-3));
  CHECK(st.theta.v1 == doctest::Approx(truth.v1).epsilon(1e-3));
}

TEST_CASE("rls_update: 200 noisy points match weighted batch least squares") {
  Rng rng(101);
  const Vec2 truth{-10.0, 5000.0};
  std::vector<Observation> obs;
  for (int i = 0; i < 200; ++i) {
    const double r = 5.0 + 25.0 * rng.uniform01();
    const Vec2 x{r, 1.0};
    obs.push_back({x, dot(x, truth) + rng.normal(0.0, 3.0)});
  }
  const auto st = run_rls(obs, 0.95);
  const Vec2 batch = batch_wls(obs, 0.95);
  CHECK(std::abs(st.theta.v0 - batch.v0) <=
        1e-6 * std::max(1.0, std::abs(batch.v0)));
  CHECK(std::abs(st.theta.v1 - batch.v1) <=
        1e-6 * std::max(1.0, std::abs(batch.v1)));
  // within 3 standard errors of the truth, sigma scale from the batch fit
  CHECK(std::abs(st.theta.v1 - truth.v1) < 3.0 * 3.0 * std::sqrt(st.p.m11));
}

TEST_CASE("rls: batch equivalence over random sequences and factors") {
  Rng rng(555);
  for (int trial = 0; trial < 25; ++trial) {
    const double rho = 0.85 + 0.15 * rng.uniform01();
    const int n = 100 + static_cast<int>(rng.uniform01() * 400);
    const Vec2 truth{-(1.0 + 20.0 * rng.uniform01()), 100.0 + 5000.0 * rng.uniform01()};
    std::vector<Observation> obs;
    for (int i = 0; i < n; ++i) {
      const Vec2 x{1.0 + 40.0 * rng.uniform01(), 1.0};
      obs.push_back({x, dot(x, truth) + rng.normal(0.0, 2.0)});
    }
    const auto st = run_rls(obs, rho);
    const Vec2 batch = batch_wls(obs, rho);
    REQUIRE(std::abs(st.theta.v0 - batch.v0) <=
            1e-6 * std::max(1.0, std::abs(batch.v0)));
    REQUIRE(std::abs(st.theta.v1 - batch.v1) <=
            1e-6 * std::max(1.0, std::abs(batch.v1)));
  }
}

TEST_CASE("rls: persistent excitation bounds the covariance") {
  Rng rng(7);
  EstimatorState st;
  st.rho = 0.9;
  const Vec2 truth{-5.0, 100.0};
  double after_window = 0.0;
  for (int t = 0; t <400; ++t) {
    const Vec2 x{t % 2 == 0 ? 10.0 : 20.0, 1.0};  // two distinct rates
    st = rls_update(st, {x, dot(x, truth) + rng.normal(0.0, 1.0)});
    if (t == 10) after_window = eig_max_sym(st.p);
    if (t > 10) REQUIRE(eig_max_sym(st.p) <= after_window * (1.0 + 1e-9));
  }
}

TEST_CASE("rls: rho = 1 estimation error variance shrinks with samples") {
  const Vec2 truth{-8.0, 900.0};
  const std::vector<int> checkpoints = {50, 100, 200, 400};
  std::vector<double> err(checkpoints.size(), 0.0);
  for (std::uint64_t run = 0; run < 10; ++run) {
    Rng rng(run + 40);
    EstimatorState st;
    st.rho = 1.0;
    for (int t = 1; t <= 400; ++t) {
      const Vec2 x{5.0 + 20.0 * rng.uniform01(), 1.0};
      st = rls_update(st, {x, dot(x, truth) + rng.normal(0.0, 2.0)});
      for (std::size_t k = 0; k < checkpoints.size(); ++k)
        if (t == checkpoints[k]) {
          const Vec2 d = st.theta - truth;
          err[k] += dot(d, d);
        }
    }
  }
  for (std::size_t k = 1; k < err.size(); ++k) REQUIRE(err[k] <= err[k - 1]);
}

TEST_CASE("adaptive_rho: perfectly tuned filter saturates at rho_max") {
  AdaptiveFfConfig cfg;
  EstimatorState st;
  st.trackers_initialized = true;
  st.noise_var_hat = 4.0;
  st.e_var_hat = 4.0;  // sigma_e == sigma
  st.q_var_hat = 1.0;
  st.theta = {0.0, 0.0};
  const auto next = adaptive_rho(st, {{1.0, 1.0}, 0.0}, cfg);
  CHECK(next.rho == cfg.rho_max);
}

TEST_CASE("adaptive_rho: a sudden parameter change lowers rho") {
  AdaptiveFfConfig cfg;
  Rng rng(3);
  EstimatorState st;
  st.rho = cfg.rho_max;
  const Vec2 before{-10.0, 5000.0};
  for (int t = 0; t < 300; ++t) {
    const Vec2 x{10.0 + 10.0 * rng.uniform01(), 1.0};
    const Observation obs{x, dot(x, before) + rng.normal(0.0, 1.0)};
    st = rls_update(adaptive_rho(st, obs, cfg), obs);
  }
  const double settled_rho = st.rho;
  CHECK(settled_rho > 0.99);  // tuned filter runs near the cap
  // jump: demand intercept moves 10%
  const Vec2 after{-10.0, 5500.0};
  double min_rho = 1.0;
  for (int t = 0; t < 10; ++t) {
    const Vec2 x{10.0 + 10.0 * rng.uniform01(), 1.0};
    const Observation obs{x, dot(x, after) + rng.normal(0.0, 1.0)};
    st = adaptive_rho(st, obs, cfg);
    min_rho = std::min(min_rho, st.rho);
    st = rls_update(st, obs);
  }
  CHECK(min_rho < settled_rho);
  CHECK(min_rho >= cfg.rho_min);
}

TEST_CASE("adaptive_rho: rho always stays inside [rho_min, rho_max]") {
  AdaptiveFfConfig cfg;
  Rng rng(31);
  EstimatorState st;
  const Vec2 truth{-10.0, 5000.0};
  for (int t = 0; t < 2000; ++t) {
    Vec2 x{5.0 + 30.0 * rng.uniform01(), 1.0};
    double y = dot(x, truth) + rng.normal(0.0, 1.0 + 50.0 * rng.uniform01());
    if (t % 97 == 0) y *= 4.0;  // sporadic shocks
    const Observation obs{x, y};
    st = adaptive_rho(st, obs, cfg);
    REQUIRE(st.rho >= cfg.rho_min);
    REQUIRE(st.rho <= cfg.rho_max);
    st = rls_update(st, obs);
  }
}

TEST_CASE("phi_weight: piecewise regions") {
  const MEstimateThresholds th = thresholds_from_sigma(1.0);
  CHECK(th.xi == doctest::Approx(1.96));
  CHECK(th.delta1 == doctest::Approx(2.24));
  CHECK(th.delta2 == doctest::Approx(2.576));

  CHECK(phi_weight(0.0, th) == 1.0);
  CHECK(phi_weight(0.5 * th.xi, th) == 1.0);
  CHECK(phi_weight(th.delta2 + 1.0, th) == 0.0);
  const double mid = 0.5 * (th.xi + th.delta1);
  CHECK(phi_weight(mid, th) == doctest::Approx(th.xi / mid));
  CHECK(phi_weight(-mid, th) == doctest::Approx(th.xi / mid));
}

TEST_CASE("phi_weight: matches numerical differentiation of phi") {
  // phi on [xi, delta1): xi|e| - xi^2/2; at e = (xi+delta1)/2 the weight is
  // phi'(e)/e = xi/e.
  const MEstimateThresholds th = thresholds_from_sigma(2.5);
  const double e = 0.5 * (th.xi + th.delta1);
  auto phi = [&](double v) {
    const double a = std::abs(v);
    if (a < th.xi) return a * a / 2.0;
    return th.xi * a - th.xi * th.xi / 2.0;
  };
  const double h = 1e-6;
  const double dphi = (phi(e + h) - phi(e - h)) / (2.0 * h);
  CHECK(phi_weight(e, th) == doctest::Approx(dphi / e).epsilon(1e-8));
}

TEST_CASE("robust_rls_update: residuals below xi for a whole run => bit-identical") {
  Rng rng(13);
  const Vec2 truth{-10.0, 5000.0};
  RobustConfig cfg;
  EstimatorState plain, robust;
  plain.rho = robust.rho = 0.95;
  for (int t = 0; t < 300; ++t) {
    const Vec2 x{10.0 + 10.0 * rng.uniform01(), 1.0};
    // noise clipped well inside the 1.96-sigma cut so the hypothesis holds
    const double noise = std::clamp(rng.normal(0.0, 1.0), -1.3, 1.3);
    const Observation obs{x, dot(x, truth) + noise};
    if (robust.updates >= cfg.warmup) {
      const double e = obs.y - dot(obs.x, robust.theta);
      const auto th = thresholds_from_sigma(std::sqrt(robust.noise_var_hat));
      REQUIRE(std::abs(e) < th.xi);  // hypothesis of the invariant
    }
    plain = rls_update(plain, obs);
    robust = robust_rls_update(robust, obs, cfg);
    REQUIRE(plain.theta.v0 == robust.theta.v0);
    REQUIRE(plain.theta.v1 == robust.theta.v1);
    REQUIRE(plain.p.m00 == robust.p.m00);
    REQUIRE(plain.p.m11 == robust.p.m11);
  }
}

TEST_CASE("robust_rls_update: gross outlier is fully rejected, state held") {
  Rng rng(13);
  const Vec2 truth{-10.0, 5000.0};
  RobustConfig cfg;
  EstimatorState st;
  st.rho = 0.95;
  for (int t = 0; t < 100; ++t) {
    const Vec2 x{10.0 + 10.0 * rng.uniform01(), 1.0};
    st = robust_rls_update(st, {x, dot(x, truth) + rng.normal(0.0, 1.0)}, cfg);
  }
  const EstimatorState before = st;
  const Vec2 x{15.0, 1.0};
  const auto after = robust_rls_update(st, {x, dot(x, truth) * 5.0}, cfg);
  CHECK(after.theta.v0 == before.theta.v0);
  CHECK(after.theta.v1 == before.theta.v1);
  CHECK(after.p.m00 == before.p.m00);
  CHECK(after.p.m11 == before.p.m11);
  CHECK(after.updates == before.updates + 1);
}

TEST_CASE("robust_rls_update: 10% gross outliers, error 5x smaller than plain") {
  Rng rng(77);
  const Vec2 truth{-10.0, 5000.0};
  std::vector<Observation> obs;
  std::vector<Observation> clean_subset;
  for (int t = 0; t < 600; ++t) {
    const Vec2 x{5.0 + 25.0 * rng.uniform01(), 1.0};
    Observation o{x, dot(x, truth) + rng.normal(0.0, 5.0)};
    if (rng.uniform01() < 0.1) {
      o.y *= 5.0;  // gross corruption
      obs.push_back(o);
    } else {
      obs.push_back(o);
      clean_subset.push_back(o);
    }
  }
  EstimatorState plain, robust;
  plain.rho = robust.rho = 0.98;
  for (const auto& o : obs) {
    plain = rls_update(plain, o);
    robust = robust_rls_update(robust, o, {});
  }
  const Vec2 ref = batch_wls(clean_subset, 0.98);
  const Vec2 dp = plain.theta - ref;
  const Vec2 dr = robust.theta - ref;
  const double err_plain = std::sqrt(dot(dp, dp));
  const double err_robust = std::sqrt(dot(dr, dr));
  CHECK(err_robust <= 0.2 * err_plain);
}
