#include "lendsim/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

constexpr std::uint64_t kMarketStream = 0x6d61726b65740000ULL;
constexpr std::uint64_t kControllerStream = 0x6374726c00000000ULL;
constexpr std::uint64_t kAdversaryStream = 0x6164760000000000ULL;

}  // namespace

void ScenarioConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon: must be >= 1");
  if (runs < 1) throw ConfigError("runs: must be >= 1");
  const auto& c = market.curve;
  if (!(c.a_b > 0 && c.b_b > 0 && c.a_l > 0 && c.b_l > 0))
    throw ConfigError("market.curve: slopes and intercepts must be positive");
  if (!c.admissible())
    throw ConfigError(
        "market.curve: admissibility b_l/a_l < r_min < r_max < b_b/a_b violated");
  if (market.trajectory.update_interval < 1)
    throw ConfigError("market.trajectory.update_interval: must be >= 1");
  if (market.trajectory.sigma_trns < 0)
    throw ConfigError("market.trajectory.sigma_trns: must be >= 0");
  if (market.trajectory.mode == TrajectoryMode::kReplay &&
      market.trajectory.replay.empty())
    throw ConfigError("market.trajectory.replay: empty schedule in replay mode");
  if (market.noise_sd < 0) throw ConfigError("market.noise_sd: must be >= 0");
  if (!(market.risk.collateral_factor > 0 &&
        market.risk.collateral_factor < market.risk.liq_threshold &&
        market.risk.liq_threshold < 1))
    throw ConfigError("market.risk: needs 0 < c < LT < 1");
  if (!(controller.target_util > 0 && controller.target_util < 1))
    throw ConfigError("controller.target_util: must be in (0,1)");
  if (!(controller.u_max > 0 && controller.u_max <= 1))
    throw ConfigError("controller.u_max: must be in (0,1]");
  const auto& b = controller.rate_bounds;
  if (b.hi > b.lo && b.lo < 0)
    throw ConfigError("controller.rate_bounds: lower bound must be >= 0");
  if (!(estimator.rho > 0 && estimator.rho <= 1))
    throw ConfigError("estimator.rho: must be in (0,1]");
  if (estimator.lag < 1) throw ConfigError("estimator.lag: must be >= 1");
  if (adversary.kind == AttackKind::kIntermittent) {
    const auto& a = adversary.intermittent;
    if (!(a.activation_prob >= 0 && a.activation_prob <= 1))
      throw ConfigError("adversary.intermittent.activation_prob: must be in [0,1]");
    if (a.sigma_attack < 0)
      throw ConfigError("adversary.intermittent.sigma_attack: must be >= 0");
  }
  if (adversary.kind == AttackKind::kPersistentBorrower) {
    const auto& a = adversary.persistent;
    if (!(a.gamma_adv > 1)) throw ConfigError("adversary.persistent.gamma_adv: must be > 1");
    if (a.duration < 1) throw ConfigError("adversary.persistent.duration: must be >= 1");
  }
  if (adversary.kind == AttackKind::kWithholding) {
    const auto& a = adversary.withholding;
    if (!(a.share > 0 && a.share < 1))
      throw ConfigError("adversary.withholding.share: must be in (0,1)");
    if (!(a.external_rate > 0))
      throw ConfigError("adversary.withholding.external_rate: must be > 0");
    if (controller.kind != ControllerKind::kStatic)
      throw ConfigError("adversary.withholding: requires the static controller");
  }
  if (output.format != "csv" && output.format != "json")
    throw ConfigError("output.format: must be csv or json");
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "rate_deviation",   "util_mse",          "normalized_rate_dev",
      "param_rmse_a_b",   "param_rmse_b_b",    "param_rmse_a_l",
      "param_rmse_b_l",   "pred_error_demand", "pred_error_supply",
      "demand_fn_rmse",   "supply_fn_rmse",    "mean_supply",
      "mean_rate"};
  return names;
}

std::vector<double> metric_values(const MetricReport& rep) {
  return {rep.rate_deviation,   rep.util_mse,          rep.normalized_rate_dev,
          rep.param_rmse[0],    rep.param_rmse[1],     rep.param_rmse[2],
          rep.param_rmse[3],    rep.pred_error_demand, rep.pred_error_supply,
          rep.demand_fn_rmse,   rep.supply_fn_rmse,    rep.mean_supply,
          rep.mean_rate};
}

std::vector<Aggregate> aggregate_reports(const std::vector<MetricReport>& reports) {
  const std::size_t m = metric_names().size();
  std::vector<Aggregate> out(m);
  if (reports.empty()) return out;
  const double n = static_cast<double>(reports.size());
  std::vector<std::vector<double>> vals;
  vals.reserve(reports.size());
  for (const auto& r : reports) vals.push_back(metric_values(r));
  for (std::size_t k = 0; k < m; ++k) {
    double mean = 0;
    for (const auto& v : vals) mean += v[k];
    mean /= n;
    double var = 0;
    for (const auto& v : vals) var += (v[k] - mean) * (v[k] - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    out[k] = {mean, std::sqrt(var / n)};
  }
  return out;
}

namespace {

RateBounds effective_bounds(const ScenarioConfig& cfg) {
  const auto& b = cfg.controller.rate_bounds;
  if (b.hi > b.lo) return b;
  return {0.0, 10.0 * cfg.market.curve.r_max};
}

struct RunSetup {
  CurveParams params0;
  PoolState pool0;
  double rate0 = 0;
  double supply_cap = 0;
};

RunSetup initial_state(const ScenarioConfig& cfg) {
  RunSetup s;
  s.params0 = cfg.market.trajectory.mode == TrajectoryMode::kReplay &&
                      !cfg.market.trajectory.replay.empty()
                  ? [&] {
                      CurveParams p = cfg.market.curve;
                      const auto& e = cfg.market.trajectory.replay.front();
                      p.a_b = e.a_b; p.b_b = e.b_b; p.a_l = e.a_l; p.b_l = e.b_l;
                      return p;
                    }()
                  : cfg.market.curve;
  s.rate0 = optimal_rate_util(s.params0.a_b, s.params0.b_b, s.params0.a_l,
                              s.params0.b_l, cfg.controller.target_util);
  auto pool = steady_state_pool(s.params0, s.rate0);
  if (!pool)
    throw ConfigError(
        "market.curve: no admissible steady state at the target-utilization rate");
  s.pool0 = *pool;
  s.pool0.collateral_factor = cfg.market.risk.collateral_factor;
  s.pool0.liq_threshold = cfg.market.risk.liq_threshold;
  s.pool0.liq_incentive = cfg.market.risk.liq_incentive;
  s.pool0.price = {cfg.market.heston.p0, cfg.market.heston.var0};
  s.supply_cap = cfg.market.supply_cap.value_or(100.0 * s.pool0.supply);
  return s;
}

}  // namespace

RunTrace simulate_run(const ScenarioConfig& cfg, std::uint64_t run_index) {
  cfg.validate();
  Rng market_rng = Rng::for_run(cfg.base_seed, run_index, kMarketStream);
  Rng ctrl_rng = Rng::for_run(cfg.base_seed, run_index, kControllerStream);
  Rng adv_rng = Rng::for_run(cfg.base_seed, run_index, kAdversaryStream);

  const RunSetup setup = initial_state(cfg);
  const RateBounds bounds = effective_bounds(cfg);

  CurveParams params = setup.params0;
  PoolState pool = setup.pool0;
  Controller ctrl(cfg.controller, cfg.estimator.mode, cfg.estimator.rho,
                  cfg.estimator.adaptive, cfg.estimator.robust, setup.rate0, bounds);
  PersistentAttackState pstate;

  const int lag = cfg.estimator.lag;
  std::vector<double> rate_at(static_cast<std::size_t>(cfg.horizon) + 1, setup.rate0);
  std::vector<double> util_at(static_cast<std::size_t>(cfg.horizon) + 1, pool.util);

  RunTrace trace;
  trace.target_util = cfg.controller.target_util;
  trace.rows.reserve(static_cast<std::size_t>(cfg.horizon));

  for (long t = 1; t <= cfg.horizon; ++t) {
    params = step_params(cfg.market.trajectory, params, t, market_rng);
    pool.price = step_price(pool.price, cfg.market.heston, market_rng);

    if (cfg.adversary.kind == AttackKind::kPersistentBorrower)
      pstate = step_persistent(cfg.adversary.persistent, pstate, adv_rng);

    const double rate = ctrl.step(pool, ctrl_rng);
    rate_at[static_cast<std::size_t>(t)] = rate;
    util_at[static_cast<std::size_t>(t)] = pool.util;

    double demand, supply;
    if (cfg.adversary.kind == AttackKind::kWithholding) {
      // Theorem-4 world: inelastic truthful capacities, the agent alone reacts.
      const auto& agent = cfg.adversary.withholding;
      const auto& curve = cfg.controller.static_curve;
      const double cap_b = cfg.adversary.withholding_borrow > 0
                               ? cfg.adversary.withholding_borrow
                               : setup.pool0.borrow;
      const double cap_l = cfg.adversary.withholding_supply > 0
                               ? cfg.adversary.withholding_supply
                               : setup.pool0.supply;
      const double noise =
          cfg.market.noise_sd > 0 ? market_rng.normal(0.0, cfg.market.noise_sd) : 0.0;
      if (agent.side == Side::kLender) {
        const double deposit =
            cfg.adversary.strategic
                ? withholding_optimum_lender(agent, cap_b, cap_l, curve)
                : truthful_deposit(agent, cap_b, cap_l, curve);
        demand = cap_b + noise;
        supply = cap_l * (1.0 - agent.share) + deposit;
      } else {
        const double borrowed =
            cfg.adversary.strategic
                ? withholding_optimum_borrower(agent, cap_b, cap_l, curve)
                : truthful_borrow(agent, cap_b, cap_l, curve);
        demand = cap_b * (1.0 - agent.share) + borrowed + noise;
        supply = cap_l;
      }
      demand = std::clamp(demand, 0.0, supply);
    } else {
      const CurveParams effective =
          cfg.adversary.kind == AttackKind::kPersistentBorrower
              ? apply_persistent_borrower(cfg.adversary.persistent, params, pstate)
              : params;
      demand = truthful_demand(effective, rate, pool.supply, cfg.market.noise_sd,
                               market_rng);
      supply = truthful_supply(params, rate, pool.util, pool.borrow,
                               setup.supply_cap, cfg.market.noise_sd, market_rng);
      if (cfg.adversary.kind == AttackKind::kIntermittent) {
        std::tie(demand, supply) =
            apply_intermittent(cfg.adversary.intermittent, demand, supply, adv_rng);
        demand = std::clamp(demand, 0.0, pool.supply);
        supply = std::max(supply, pool.borrow);
      }
    }

    pool = advance_pool(pool, demand, supply, rate);

    // The response to the block-(t+1-lag) rate is what just realized.
    TraceRow row;
    const long xi = t + 1 - lag;
    if (ctrl.uses_estimators() && xi >= 0) {
      const double x_rate = rate_at[static_cast<std::size_t>(xi)];
      const double x_eff = x_rate * util_at[static_cast<std::size_t>(xi)];
      const Observation demand_obs{{x_rate, 1.0}, pool.borrow};
      const Observation supply_obs{{x_eff, 1.0}, pool.supply};
      row.pred_demand = dot(demand_obs.x, ctrl.demand_estimator().theta);
      row.pred_supply = dot(supply_obs.x, ctrl.supply_estimator().theta);
      ctrl.observe(demand_obs, supply_obs);
    } else {
      row.pred_demand = pool.borrow;
      row.pred_supply = pool.supply;
    }

    row.t = t;
    row.rate = rate;
    row.util = pool.util;
    row.borrow = pool.borrow;
    row.supply = pool.supply;
    row.price = pool.price.p;
    row.collateral_factor = pool.collateral_factor;
    row.liq_threshold = pool.liq_threshold;
    const auto& de = ctrl.demand_estimator();
    const auto& se = ctrl.supply_estimator();
    row.a_b_hat = ctrl.uses_estimators() ? de.a_b_hat() : 0.0;
    row.b_b_hat = ctrl.uses_estimators() ? de.b_b_hat() : 0.0;
    row.a_l_hat = ctrl.uses_estimators() ? se.a_l_hat() : 0.0;
    row.b_l_hat = ctrl.uses_estimators() ? se.b_l_hat() : 0.0;
    row.rho = ctrl.uses_estimators() ? de.rho : 0.0;
    row.p_b_00 = ctrl.uses_estimators() ? de.p.m00 : 0.0;
    row.p_b_11 = ctrl.uses_estimators() ? de.p.m11 : 0.0;
    row.p_l_00 = ctrl.uses_estimators() ? se.p.m00 : 0.0;
    row.p_l_11 = ctrl.uses_estimators() ? se.p.m11 : 0.0;
    row.true_params = params;
    trace.rows.push_back(row);
  }
  return trace;
}

std::vector<RunTrace> simulate_all(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  const long n = cfg.runs;
  std::vector<RunTrace> traces(static_cast<std::size_t>(n));
  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (workers == 1) {
    for (long i = 0; i < n; ++i)
      traces[static_cast<std::size_t>(i)] =
          simulate_run(cfg, static_cast<std::uint64_t>(i));
    return traces;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= n) return;
        traces[static_cast<std::size_t>(i)] =
            simulate_run(cfg, static_cast<std::uint64_t>(i));
      }
    });
  }
  for (auto& th : pool) th.join();
  return traces;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg, int threads,
                            std::vector<RunTrace>* traces_out) {
  auto traces = simulate_all(cfg, threads);
  ScenarioResult result;
  result.per_run.reserve(traces.size());
  for (const auto& tr : traces)
    result.per_run.push_back(compute_metrics(tr, cfg.metric_warmup));
  result.aggregated = aggregate_reports(result.per_run);
  if (traces_out) *traces_out = std::move(traces);
  return result;
}

AdversarialImpact measure_adversarial_impact(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  const long mixing =
      cfg.controller.kind == ControllerKind::kStatic
          ? 50
          : std::max<long>(50, static_cast<long>(
                                   std::ceil(5.0 / (1.0 - std::min(cfg.estimator.rho,
                                                                   0.999)))));
  if (cfg.horizon < 4 * mixing)
    throw ConfigError("horizon: too short for steady-state measurement (< 4x mixing window of " +
                      std::to_string(mixing) + " blocks)");

  ScenarioConfig truthful = cfg;
  if (cfg.adversary.kind == AttackKind::kWithholding)
    truthful.adversary.strategic = false;  // agent stays, behaves truthfully
  else
    truthful.adversary.kind = AttackKind::kNone;
  auto traces_attack = simulate_all(cfg, threads);
  auto traces_truth = simulate_all(truthful, threads);

  AdversarialImpact impact;
  const long start = cfg.horizon - cfg.horizon / 4;
  for (std::size_t i = 0; i < traces_attack.size(); ++i) {
    double acc = 0;
    long n = 0;
    for (std::size_t k = 0; k < traces_attack[i].rows.size(); ++k) {
      if (traces_attack[i].rows[k].t <= start) continue;
      acc += std::abs(traces_attack[i].rows[k].rate - traces_truth[i].rows[k].rate);
      ++n;
    }
    impact.per_run_gap.push_back(n > 0 ? acc / static_cast<double>(n) : 0.0);
  }
  for (double g : impact.per_run_gap) impact.measured_gap += g;
  impact.measured_gap /= static_cast<double>(impact.per_run_gap.size());

  switch (cfg.adversary.kind) {
    case AttackKind::kPersistentBorrower: {
      // LC-style bound with the realized withholding share: the attacker's
      // misreported demand is a_b r (gamma - 1), largest at the biggest rate
      // it induced; cap the share at 1.
      double max_gap_demand = 0;
      for (std::size_t i = 0; i < traces_attack.size(); ++i)
        for (std::size_t k = 0; k < traces_attack[i].rows.size(); ++k) {
          const auto& row = traces_attack[i].rows[k];
          const double d = row.true_params.a_b *
                           (cfg.adversary.persistent.gamma_adv - 1.0) * row.rate;
          max_gap_demand = std::max(max_gap_demand, d);
        }
      double b_b = cfg.market.curve.b_b;
      const double share = std::min(1.0, max_gap_demand / b_b);
      impact.bound = b_b * share / (2.0 * cfg.market.curve.a_b);
      impact.bound_name = "learning_controller_borrower";
      break;
    }
    case AttackKind::kWithholding: {
      const auto& agent = cfg.adversary.withholding;
      const auto setup = initial_state(cfg);
      const double borrow = cfg.adversary.withholding_borrow > 0
                                ? cfg.adversary.withholding_borrow
                                : setup.pool0.borrow;
      const double supply = cfg.adversary.withholding_supply > 0
                                ? cfg.adversary.withholding_supply
                                : setup.pool0.supply;
      impact.bound =
          agent.side == Side::kLender
              ? withholding_bound_lender(borrow, supply, agent.share,
                                         cfg.controller.static_curve)
              : withholding_bound_borrower(borrow, supply, agent.share,
                                           cfg.controller.static_curve);
      impact.bound_name = agent.side == Side::kLender ? "static_curve_lender"
                                                      : "static_curve_borrower";
      break;
    }
    default:
      impact.bound = 0;
      impact.bound_name = "none";
      break;
  }
  return impact;
}

}  // namespace lendsim
