#include <doctest.h>

#include <cmath>

#include "lendsim/errors.hpp"
#include "lendsim/market.hpp"

using namespace lendsim;

TEST_CASE("step_price: all randomness and drift removed is the identity") {
  PriceState s{100.0, 0.0};
  HestonParams h{0.0, 0.0, 0.0, 0.0, 0.0, 100.0};
  Rng rng(1);
  const auto next = step_price(s, h, rng);
  CHECK(next.p == doctest::Approx(100.0));
  CHECK(next.var == 0.0);
}

TEST_CASE("step_price: drift cancels the variance correction exactly") {
  PriceState s{100.0, 0.04};
  HestonParams h{0.02, 0.0, 0.0, 0.0, 0.04, 100.0};
  // kappa = xi = 0 keep the variance at 0.04; force the price draw to 0 by
  // checking the deterministic part: mu - var/2 = 0.02 - 0.02 = 0.
  Rng probe(7);
  probe.normal();  // eta position in the stream
  const double eps = probe.normal();
  Rng rng(7);
  const auto next = step_price(s, h, rng);
  CHECK(next.var == doctest::Approx(0.04));
  CHECK(next.p == doctest::Approx(100.0 * std::exp(0.2 * eps)));
  // and with eps = 0 the update is exactly the identity:
  CHECK(100.0 * std::exp(0.02 - 0.5 * 0.04) == doctest::Approx(100.0));
}

TEST_CASE("step_price: hand evaluation with logged draws") {
  PriceState s{1.0, 0.01};
  HestonParams h{0.0, 0.5, 0.04, 0.1, 0.01, 1.0};
  Rng logger(42);
  const double eta = logger.normal();
  const double eps = logger.normal();
  double var = 0.01 + 0.5 * (0.04 - 0.01) + 0.1 * std::sqrt(0.01) * eta;
  var = std::max(0.0, var);
  const double p = 1.0 * std::exp((0.0 - var / 2.0) + std::sqrt(var) * eps);

  Rng rng(42);
  const auto next = step_price(s, h, rng);
  CHECK(next.var == doctest::Approx(var).epsilon(1e-15));
  CHECK(next.p == doctest::Approx(p).epsilon(1e-15));
}

TEST_CASE("step_price: variance clamp and deterministic convergence to theta") {
  HestonParams h{0.0, 0.3, 0.04, 0.0, 0.0, 1.0};
  PriceState s{1.0, 0.5};
  Rng rng(3);
  double prev_gap = std::abs(s.var - h.theta);
  for (int t = 0; t < 100; ++t) {
    s = step_price(s, h, rng);
    CHECK(s.var >= 0.0);
    const double gap = std::abs(s.var - h.theta);
    CHECK(gap <= prev_gap + 1e-15);
    prev_gap = gap;
  }
  CHECK(s.var == doctest::Approx(h.theta).epsilon(1e-10));
}

TEST_CASE("step_price: price stays positive over long horizons") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    HestonParams h{0.001, 0.1, 0.09, 0.3, 0.09, 50.0};
    PriceState s{50.0, 0.09};
    for (int t = 0; t < 10000; ++t) {
      s = step_price(s, h, rng);
      REQUIRE(s.p > 0.0);
      REQUIRE(s.var >= 0.0);
    }
  }
  // one long run
  Rng rng(9001);
  HestonParams h{0.0, 0.05, 0.04, 0.2, 0.04, 1.0};
  PriceState s{1.0, 0.04};
  for (long t = 0; t < 1000000; ++t) {
    s = step_price(s, h, rng);
    REQUIRE(s.p > 0.0);
  }
}

TEST_CASE("step_params: static mode returns input unchanged") {
  ParamTrajectory traj;
  traj.mode = TrajectoryMode::kStatic;
  CurveParams p = traj.base;
  Rng rng(1);
  const auto next = step_params(traj, p, 25, rng);
  CHECK(next.a_b == p.a_b);
  CHECK(next.b_b == p.b_b);
  CHECK(next.a_l == p.a_l);
  CHECK(next.b_l == p.b_l);
}

TEST_CASE("step_params: zero-variance walk is the identity at every block") {
  ParamTrajectory traj;
  traj.mode = TrajectoryMode::kRandomWalk;
  traj.sigma_trns = 0.0;
  traj.update_interval = 25;
  CurveParams p = traj.base;
  Rng rng(1);
  for (long t = 1; t <= 200; ++t) {
    p = step_params(traj, p, t, rng);
    CHECK(p.a_b == traj.base.a_b);
    CHECK(p.b_b == traj.base.b_b);
  }
}

TEST_CASE("step_params: walk matches a replay of the logged draws") {
  ParamTrajectory traj;
  traj.mode = TrajectoryMode::kRandomWalk;
  traj.sigma_trns = 0.1;
  traj.update_interval = 25;
  const CurveParams p0 = traj.base;

  Rng logger(11);
  const double na = logger.normal(0.0, 0.1 * std::abs(p0.a_b));
  const double nb = logger.normal(0.0, 0.1 * std::abs(p0.b_b));
  const double nal = logger.normal(0.0, 0.1 * std::abs(p0.a_l));
  const double nbl = logger.normal(0.0, 0.1 * std::abs(p0.b_l));

  Rng rng(11);
  const auto at24 = step_params(traj, p0, 24, rng);
  CHECK(at24.a_b == p0.a_b);  // off-interval blocks do not jump
  const auto next = step_params(traj, p0, 25, rng);
  CHECK(next.a_b == doctest::Approx(p0.a_b + na).epsilon(1e-15));
  CHECK(next.b_b == doctest::Approx(p0.b_b + nb).epsilon(1e-15));
  CHECK(next.a_l == doctest::Approx(p0.a_l + nal).epsilon(1e-15));
  CHECK(next.b_l == doctest::Approx(p0.b_l + nbl).epsilon(1e-15));
}

TEST_CASE("step_params: replay schedule and misconfiguration errors") {
  ParamTrajectory traj;
  traj.mode = TrajectoryMode::kReplay;
  Rng rng(1);
  CHECK_THROWS_AS(step_params(traj, traj.base, 0, rng), ConfigError);

  traj.replay = {{0, 10, 5000, 500, 50}, {100, 20, 6000, 400, 40}};
  auto p = step_params(traj, traj.base, 0, rng);
  CHECK(p.a_b == 10);
  p = step_params(traj, p, 99, rng);
  CHECK(p.a_b == 10);
  p = step_params(traj, p, 100, rng);
  CHECK(p.a_b == 20);
  p = step_params(traj, p, 5000, rng);  // last entry holds
  CHECK(p.b_b == 6000);

  traj.replay = {{10, 1, 2, 3, 4}};
  CHECK_THROWS_AS(step_params(traj, traj.base, 5, rng), ConfigError);
}

TEST_CASE("step_params: walk keeps parameters positive and the band admissible") {
  ParamTrajectory traj;
  traj.mode = TrajectoryMode::kRandomWalk;
  traj.sigma_trns = 1.0;  // violent walk, positivity clamps will trigger
  traj.update_interval = 1;
  CurveParams p = traj.base;
  Rng rng(5);
  for (long t = 1; t <= 2000; ++t) {
    p = step_params(traj, p, t, rng);
    REQUIRE(p.a_b > 0);
    REQUIRE(p.b_b > 0);
    REQUIRE(p.a_l > 0);
    REQUIRE(p.b_l > 0);
    REQUIRE(p.admissible());
  }
}

TEST_CASE("truthful_demand: three branches") {
  CurveParams p;  // band [1, 400], a_b=10, b_b=5000
  Rng rng(1);
  CHECK(truthful_demand(p, 0.5, 1000.0, 0.0, rng) == 1000.0);  // below band
  CHECK(truthful_demand(p, 401.0, 1000.0, 0.0, rng) == 0.0);   // above band
  CurveParams q{10.0, 50.0, 500.0, 1.0, 0.1, 4.0};
  CHECK(truthful_demand(q, 2.0, 1000.0, 0.0, rng) == doctest::Approx(30.0));
}

TEST_CASE("truthful_demand: noise then clamps") {
  CurveParams q{10.0, 50.0, 500.0, 1.0, 0.1, 4.0};
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const double d = truthful_demand(q, 2.0, 32.0, 50.0, rng);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 32.0);
  }
}

TEST_CASE("truthful_supply: three branches") {
  CurveParams p{10.0, 5000.0, 500.0, 50.0, 0.15, 0.5};
  Rng rng(1);
  // r*U = 0.1 below band
  CHECK(truthful_supply(p, 0.5, 0.2, 300.0, 1e6, 0.0, rng) == 300.0);
  // in-band: a_l r U - b_l = 500*0.2 - 50 = 50, then max with B
  CHECK(truthful_supply(p, 0.4, 0.5, 10.0, 1e6, 0.0, rng) == doctest::Approx(50.0));
  CHECK(truthful_supply(p, 0.4, 0.5, 80.0, 1e6, 0.0, rng) == 80.0);
  // above band: cap
  CHECK(truthful_supply(p, 2.0, 0.5, 10.0, 1e6, 0.0, rng) == doctest::Approx(1e6));
}

TEST_CASE("advance_pool: clamp and degenerate pool") {
  PoolState s;
  auto a = advance_pool(s, 80.0, 100.0, 0.05);
  CHECK(a.borrow == 80.0);
  CHECK(a.supply == 100.0);
  CHECK(a.util == doctest::Approx(0.8));
  auto b = advance_pool(s, 120.0, 100.0, 0.05);
  CHECK(b.borrow == 100.0);
  CHECK(b.util == doctest::Approx(1.0));
  auto c = advance_pool(s, 0.0, 0.0, 0.05);
  CHECK(c.util == 0.0);
}

TEST_CASE("market: noise-free block sequence is constant from a steady state") {
  const CurveParams p;
  Rng rates(17);
  int tested = 0;
  while (tested < 50) {
    const double r = p.r_min + rates.uniform01() * (p.r_max - p.r_min);
    const auto pool0 = steady_state_pool(p, r);
    if (!pool0) continue;
    ++tested;
    PoolState pool = *pool0;
    Rng rng(1);
    for (int t = 0; t < 5; ++t) {
      const double d = truthful_demand(p, r, pool.supply, 0.0, rng);
      const double s = truthful_supply(p, r, pool.util, pool.borrow, 1e9, 0.0, rng);
      pool = advance_pool(pool, d, s, r);
      CHECK(pool.borrow == doctest::Approx(pool0->borrow).epsilon(1e-12));
      CHECK(pool.supply == doctest::Approx(pool0->supply).epsilon(1e-12));
      CHECK(pool.util == doctest::Approx(pool0->util).epsilon(1e-12));
    }
  }
}

TEST_CASE("market: generated blocks keep 0 <= U <= 1 and B <= L") {
  const CurveParams p;
  Rng rng(23);
  PoolState pool = *steady_state_pool(p, 19.0);
  for (int t = 0; t < 20000; ++t) {
    const double r = p.r_min + rng.uniform01() * (p.r_max - p.r_min);
    const double d = truthful_demand(p, r, pool.supply, 25.0, rng);
    const double s = truthful_supply(p, r, pool.util, pool.borrow, 1e9, 25.0, rng);
    pool = advance_pool(pool, d, s, r);
    REQUIRE(pool.util >= 0.0);
    REQUIRE(pool.util <= 1.0);
    REQUIRE(pool.borrow <= pool.supply + 1e-9);
  }
}

TEST_CASE("market: identical seeds give bit-identical trajectories") {
  auto run = [](std::uint64_t seed) {
    ParamTrajectory traj;
    traj.mode = TrajectoryMode::kRandomWalk;
    traj.sigma_trns = 0.3;
    traj.update_interval = 10;
    Rng rng(seed);
    CurveParams p = traj.base;
    std::vector<double> vals;
    for (long t = 1; t <= 500; ++t) {
      p = step_params(traj, p, t, rng);
      vals.push_back(p.a_b);
      vals.push_back(p.b_l);
    }
    return vals;
  };
  const auto a = run(99);
  const auto b = run(99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("steady_state_utilization: extreme branches and bisection cross-check") {
  const CurveParams p;
  CHECK(*steady_state_utilization(p, 0.5) == 1.0);
  CHECK(*steady_state_utilization(p, 500.0) == 0.0);

  // bisection oracle on U (a_l r U - b_l) = b_b - a_b r over the bracket
  const double r = 19.745;
  const double demand = -p.a_b * r + p.b_b;
  double lo = p.b_l / (p.a_l * r) * (1 + 1e-12), hi = 1.0;
  auto g = [&](double u) { return u * (p.a_l * r * u - p.b_l) - demand; };
  REQUIRE(g(lo) < 0);
  REQUIRE(g(hi) > 0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  CHECK(*steady_state_utilization(p, r) == doctest::Approx(lo).epsilon(1e-10));
}
