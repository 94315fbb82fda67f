#include "lendsim/config.hpp"

#include <fstream>

#include <json.hpp>

#include "lendsim/csv.hpp"
#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const Json* find(const Json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_num(const Json& j, const std::string& path, const char* key,
               double fallback, bool required = false) {
  const Json* v = find(j, key);
  if (!v) {
    if (required) fail(path + "." + key, "missing required field");
    return fallback;
  }
  if (!v->is_number()) fail(path + "." + key, "expected a number");
  return v->get<double>();
}

long get_int(const Json& j, const std::string& path, const char* key, long fallback) {
  const Json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) fail(path + "." + key, "expected an integer");
  return v->get<long>();
}

bool get_bool(const Json& j, const std::string& path, const char* key, bool fallback) {
  const Json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(path + "." + key, "expected a boolean");
  return v->get<bool>();
}

std::string get_str(const Json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
  const Json* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_string()) fail(path + "." + key, "expected a string");
  return v->get<std::string>();
}

CurveParams parse_curve(const Json& j, const std::string& path) {
  CurveParams c;
  c.a_b = get_num(j, path, "a_b", c.a_b);
  c.b_b = get_num(j, path, "b_b", c.b_b);
  c.a_l = get_num(j, path, "a_l", c.a_l);
  c.b_l = get_num(j, path, "b_l", c.b_l);
  c.r_min = get_num(j, path, "r_min", c.r_min);
  c.r_max = get_num(j, path, "r_max", c.r_max);
  return c;
}

}  // namespace

std::vector<ReplayEntry> load_replay_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("replay csv: cannot open " + path);
  std::vector<ReplayEntry> entries;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (line_no == 1 && !cells.empty() && cells[0] == "block") continue;
    if (cells.size() < 5)
      throw ConfigError("replay csv row " + std::to_string(line_no) +
                        ": expected block,a_b,b_b,a_l,b_l");
    try {
      ReplayEntry e;
      e.block = std::stol(cells[0]);
      e.a_b = std::stod(cells[1]);
      e.b_b = std::stod(cells[2]);
      e.a_l = std::stod(cells[3]);
      e.b_l = std::stod(cells[4]);
      if (!entries.empty() && e.block <= entries.back().block)
        throw ConfigError("replay csv row " + std::to_string(line_no) +
                          ": blocks must strictly increase");
      entries.push_back(e);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("replay csv row " + std::to_string(line_no) +
                        ": unparseable numeric field");
    }
  }
  if (entries.empty()) throw ConfigError("replay csv: no entries in " + path);
  return entries;
}

ScenarioConfig parse_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }

  ScenarioConfig cfg;
  cfg.horizon = get_int(j, "", "horizon", cfg.horizon);
  cfg.runs = get_int(j, "", "runs", cfg.runs);
  cfg.base_seed = static_cast<std::uint64_t>(get_int(j, "", "base_seed",
                                                     static_cast<long>(cfg.base_seed)));
  cfg.metric_warmup = get_int(j, "", "metric_warmup", cfg.metric_warmup);

  if (const Json* m = find(j, "market")) {
    const std::string p = "market";
    if (const Json* c = find(*m, "curve")) cfg.market.curve = parse_curve(*c, p + ".curve");
    if (const Json* t = find(*m, "trajectory")) {
      const std::string tp = p + ".trajectory";
      const std::string mode = get_str(*t, tp, "mode", "static");
      if (mode == "static") cfg.market.trajectory.mode = TrajectoryMode::kStatic;
      else if (mode == "random-walk")
        cfg.market.trajectory.mode = TrajectoryMode::kRandomWalk;
      else if (mode == "replay") cfg.market.trajectory.mode = TrajectoryMode::kReplay;
      else fail(tp + ".mode", "expected static | random-walk | replay");
      cfg.market.trajectory.update_interval =
          get_int(*t, tp, "update_interval", cfg.market.trajectory.update_interval);
      cfg.market.trajectory.sigma_trns =
          get_num(*t, tp, "sigma_trns", cfg.market.trajectory.sigma_trns);
      const std::string replay_csv = get_str(*t, tp, "replay_csv", "");
      if (!replay_csv.empty())
        cfg.market.trajectory.replay = load_replay_csv(replay_csv);
    }
    if (const Json* h = find(*m, "heston")) {
      const std::string hp = p + ".heston";
      cfg.market.heston.mu = get_num(*h, hp, "mu", cfg.market.heston.mu);
      cfg.market.heston.kappa = get_num(*h, hp, "kappa", cfg.market.heston.kappa);
      cfg.market.heston.theta = get_num(*h, hp, "theta", cfg.market.heston.theta);
      cfg.market.heston.xi = get_num(*h, hp, "xi", cfg.market.heston.xi);
      cfg.market.heston.var0 = get_num(*h, hp, "var0", cfg.market.heston.var0);
      cfg.market.heston.p0 = get_num(*h, hp, "p0", cfg.market.heston.p0);
    }
    cfg.market.noise_sd = get_num(*m, p, "noise_sd", cfg.market.noise_sd);
    if (const Json* sc = find(*m, "supply_cap"); sc && !sc->is_null())
      cfg.market.supply_cap = sc->get<double>();
    if (const Json* r = find(*m, "risk")) {
      const std::string rp = p + ".risk";
      cfg.market.risk.collateral_factor =
          get_num(*r, rp, "collateral_factor", cfg.market.risk.collateral_factor);
      cfg.market.risk.liq_threshold =
          get_num(*r, rp, "liq_threshold", cfg.market.risk.liq_threshold);
      cfg.market.risk.liq_incentive =
          get_num(*r, rp, "liq_incentive", cfg.market.risk.liq_incentive);
    }
  }

  if (const Json* c = find(j, "controller")) {
    const std::string p = "controller";
    const std::string kind = get_str(*c, p, "kind", "rls-util");
    if (kind == "rls-util") cfg.controller.kind = ControllerKind::kRlsUtil;
    else if (kind == "rls-revenue") cfg.controller.kind = ControllerKind::kRlsRevenue;
    else if (kind == "static") cfg.controller.kind = ControllerKind::kStatic;
    else fail(p + ".kind", "expected rls-util | rls-revenue | static");
    cfg.controller.target_util = get_num(*c, p, "target_util", cfg.controller.target_util);
    cfg.controller.u_max = get_num(*c, p, "u_max", cfg.controller.u_max);
    cfg.controller.explore = get_bool(*c, p, "explore", cfg.controller.explore);
    if (const Json* rb = find(*c, "rate_bounds"); rb && !rb->is_null()) {
      if (!rb->is_array() || rb->size() != 2)
        fail(p + ".rate_bounds", "expected [lo, hi]");
      cfg.controller.rate_bounds = {(*rb)[0].get<double>(), (*rb)[1].get<double>()};
    }
    if (const Json* sc = find(*c, "static_curve")) {
      const std::string sp = p + ".static_curve";
      cfg.controller.static_curve.r_slope1 =
          get_num(*sc, sp, "r_slope1", cfg.controller.static_curve.r_slope1);
      cfg.controller.static_curve.r_slope2 =
          get_num(*sc, sp, "r_slope2", cfg.controller.static_curve.r_slope2);
      cfg.controller.static_curve.kink =
          get_num(*sc, sp, "kink", cfg.controller.static_curve.kink);
    }
  }

  if (const Json* e = find(j, "estimator")) {
    const std::string p = "estimator";
    const std::string mode = get_str(*e, p, "mode", "fixed");
    if (mode == "fixed") cfg.estimator.mode = EstimatorMode::kFixed;
    else if (mode == "adaptive") cfg.estimator.mode = EstimatorMode::kAdaptive;
    else if (mode == "robust") cfg.estimator.mode = EstimatorMode::kRobust;
    else fail(p + ".mode", "expected fixed | adaptive | robust");
    cfg.estimator.rho = get_num(*e, p, "rho", cfg.estimator.rho);
    cfg.estimator.lag = static_cast<int>(get_int(*e, p, "lag", cfg.estimator.lag));
    if (const Json* a = find(*e, "adaptive")) {
      const std::string ap = p + ".adaptive";
      cfg.estimator.adaptive.beta = get_num(*a, ap, "beta", cfg.estimator.adaptive.beta);
      cfg.estimator.adaptive.xi_small =
          get_num(*a, ap, "xi_small", cfg.estimator.adaptive.xi_small);
      cfg.estimator.adaptive.rho_max =
          get_num(*a, ap, "rho_max", cfg.estimator.adaptive.rho_max);
      cfg.estimator.adaptive.rho_min =
          get_num(*a, ap, "rho_min", cfg.estimator.adaptive.rho_min);
    }
    if (const Json* r = find(*e, "robust")) {
      const std::string rp = p + ".robust";
      cfg.estimator.robust.warmup = get_int(*r, rp, "warmup", cfg.estimator.robust.warmup);
      cfg.estimator.robust.scale_beta =
          get_num(*r, rp, "scale_beta", cfg.estimator.robust.scale_beta);
    }
  }

  if (const Json* a = find(j, "adversary")) {
    const std::string p = "adversary";
    const std::string kind = get_str(*a, p, "kind", "none");
    if (kind == "none") cfg.adversary.kind = AttackKind::kNone;
    else if (kind == "intermittent") cfg.adversary.kind = AttackKind::kIntermittent;
    else if (kind == "persistent-borrower")
      cfg.adversary.kind = AttackKind::kPersistentBorrower;
    else if (kind == "withholding") cfg.adversary.kind = AttackKind::kWithholding;
    else fail(p + ".kind", "expected none | intermittent | persistent-borrower | withholding");
    if (find(*a, "activation_prob")) {
      const double v = get_num(*a, p, "activation_prob", 0.0);
      cfg.adversary.intermittent.activation_prob = v;
      cfg.adversary.persistent.activation_prob = v;
    }
    cfg.adversary.intermittent.sigma_attack =
        get_num(*a, p, "sigma_attack", cfg.adversary.intermittent.sigma_attack);
    cfg.adversary.persistent.duration =
        get_int(*a, p, "duration", cfg.adversary.persistent.duration);
    cfg.adversary.persistent.gamma_adv =
        get_num(*a, p, "gamma_adv", cfg.adversary.persistent.gamma_adv);
    const std::string side = get_str(*a, p, "side", "lender");
    if (side == "lender") cfg.adversary.withholding.side = Side::kLender;
    else if (side == "borrower") cfg.adversary.withholding.side = Side::kBorrower;
    else fail(p + ".side", "expected lender | borrower");
    cfg.adversary.withholding.share =
        get_num(*a, p, "share", cfg.adversary.withholding.share);
    cfg.adversary.withholding.external_rate =
        get_num(*a, p, "external_rate", cfg.adversary.withholding.external_rate);
    cfg.adversary.strategic = get_bool(*a, p, "strategic", cfg.adversary.strategic);
    cfg.adversary.withholding_borrow =
        get_num(*a, p, "withholding_borrow", cfg.adversary.withholding_borrow);
    cfg.adversary.withholding_supply =
        get_num(*a, p, "withholding_supply", cfg.adversary.withholding_supply);
  }

  if (const Json* o = find(j, "output")) {
    const std::string p = "output";
    cfg.output.dir = get_str(*o, p, "dir", cfg.output.dir);
    cfg.output.format = get_str(*o, p, "format", cfg.output.format);
    cfg.output.write_traces = get_bool(*o, p, "write_traces", cfg.output.write_traces);
  }

  cfg.validate();
  return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string dump_config(const ScenarioConfig& cfg) {
  Json j;
  j["horizon"] = cfg.horizon;
  j["runs"] = cfg.runs;
  j["base_seed"] = cfg.base_seed;
  j["metric_warmup"] = cfg.metric_warmup;

  Json curve;
  curve["a_b"] = cfg.market.curve.a_b;
  curve["b_b"] = cfg.market.curve.b_b;
  curve["a_l"] = cfg.market.curve.a_l;
  curve["b_l"] = cfg.market.curve.b_l;
  curve["r_min"] = cfg.market.curve.r_min;
  curve["r_max"] = cfg.market.curve.r_max;
  Json traj;
  traj["mode"] = cfg.market.trajectory.mode == TrajectoryMode::kStatic ? "static"
                 : cfg.market.trajectory.mode == TrajectoryMode::kRandomWalk
                     ? "random-walk"
                     : "replay";
  traj["update_interval"] = cfg.market.trajectory.update_interval;
  traj["sigma_trns"] = cfg.market.trajectory.sigma_trns;
  Json heston;
  heston["mu"] = cfg.market.heston.mu;
  heston["kappa"] = cfg.market.heston.kappa;
  heston["theta"] = cfg.market.heston.theta;
  heston["xi"] = cfg.market.heston.xi;
  heston["var0"] = cfg.market.heston.var0;
  heston["p0"] = cfg.market.heston.p0;
  Json risk;
  risk["collateral_factor"] = cfg.market.risk.collateral_factor;
  risk["liq_threshold"] = cfg.market.risk.liq_threshold;
  risk["liq_incentive"] = cfg.market.risk.liq_incentive;
  Json market;
  market["curve"] = curve;
  market["trajectory"] = traj;
  market["heston"] = heston;
  market["noise_sd"] = cfg.market.noise_sd;
  if (cfg.market.supply_cap) market["supply_cap"] = *cfg.market.supply_cap;
  else market["supply_cap"] = nullptr;
  market["risk"] = risk;
  j["market"] = market;

  Json controller;
  controller["kind"] = cfg.controller.kind == ControllerKind::kRlsUtil ? "rls-util"
                       : cfg.controller.kind == ControllerKind::kRlsRevenue
                           ? "rls-revenue"
                           : "static";
  controller["target_util"] = cfg.controller.target_util;
  controller["u_max"] = cfg.controller.u_max;
  controller["explore"] = cfg.controller.explore;
  if (cfg.controller.rate_bounds.hi > cfg.controller.rate_bounds.lo)
    controller["rate_bounds"] = {cfg.controller.rate_bounds.lo,
                                 cfg.controller.rate_bounds.hi};
  else
    controller["rate_bounds"] = nullptr;
  Json static_curve;
  static_curve["r_slope1"] = cfg.controller.static_curve.r_slope1;
  static_curve["r_slope2"] = cfg.controller.static_curve.r_slope2;
  static_curve["kink"] = cfg.controller.static_curve.kink;
  controller["static_curve"] = static_curve;
  j["controller"] = controller;

  Json estimator;
  estimator["mode"] = cfg.estimator.mode == EstimatorMode::kFixed ? "fixed"
                      : cfg.estimator.mode == EstimatorMode::kAdaptive ? "adaptive"
                                                                       : "robust";
  estimator["rho"] = cfg.estimator.rho;
  estimator["lag"] = cfg.estimator.lag;
  Json adaptive;
  adaptive["beta"] = cfg.estimator.adaptive.beta;
  adaptive["xi_small"] = cfg.estimator.adaptive.xi_small;
  adaptive["rho_max"] = cfg.estimator.adaptive.rho_max;
  adaptive["rho_min"] = cfg.estimator.adaptive.rho_min;
  estimator["adaptive"] = adaptive;
  Json robust;
  robust["warmup"] = cfg.estimator.robust.warmup;
  robust["scale_beta"] = cfg.estimator.robust.scale_beta;
  estimator["robust"] = robust;
  j["estimator"] = estimator;

  Json adversary;
  adversary["kind"] = cfg.adversary.kind == AttackKind::kNone ? "none"
                      : cfg.adversary.kind == AttackKind::kIntermittent
                          ? "intermittent"
                      : cfg.adversary.kind == AttackKind::kPersistentBorrower
                          ? "persistent-borrower"
                          : "withholding";
  adversary["activation_prob"] =
      cfg.adversary.kind == AttackKind::kPersistentBorrower
          ? cfg.adversary.persistent.activation_prob
          : cfg.adversary.intermittent.activation_prob;
  adversary["sigma_attack"] = cfg.adversary.intermittent.sigma_attack;
  adversary["duration"] = cfg.adversary.persistent.duration;
  adversary["gamma_adv"] = cfg.adversary.persistent.gamma_adv;
  adversary["side"] =
      cfg.adversary.withholding.side == Side::kLender ? "lender" : "borrower";
  adversary["share"] = cfg.adversary.withholding.share;
  adversary["external_rate"] = cfg.adversary.withholding.external_rate;
  adversary["strategic"] = cfg.adversary.strategic;
  adversary["withholding_borrow"] = cfg.adversary.withholding_borrow;
  adversary["withholding_supply"] = cfg.adversary.withholding_supply;
  j["adversary"] = adversary;

  Json output;
  output["dir"] = cfg.output.dir;
  output["format"] = cfg.output.format;
  output["write_traces"] = cfg.output.write_traces;
  j["output"] = output;

  return j.dump(2) + "\n";
}

}  // namespace lendsim
