#include "lendsim/commands.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lendsim/config.hpp"
#include "lendsim/csv.hpp"
#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ModelError("output: cannot create directory " + dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

Json aggregate_json(const std::vector<Aggregate>& agg, long runs) {
  Json out;
  out["runs"] = runs;
  Json metrics;
  const auto& names = metric_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    Json m;
    m["mean"] = agg[i].mean;
    m["stderr"] = agg[i].stderr_;
    metrics[names[i]] = m;
  }
  out["metrics"] = metrics;
  return out;
}

void write_report(const std::string& dir, const std::string& format,
                  const std::vector<Aggregate>& agg, long runs,
                  std::vector<std::string>& files) {
  if (format == "json") {
    const std::string path = join(dir, "report.json");
    std::ofstream out(path, std::ios::binary);
    out << aggregate_json(agg, runs).dump(2) << '\n';
    files.push_back(path);
  } else {
    const std::string path = join(dir, "report.csv");
    CsvWriter out(path);
    out.row({"metric", "mean", "stderr", "runs"});
    const auto& names = metric_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      out.row({names[i], fmt_double(agg[i].mean), fmt_double(agg[i].stderr_),
               std::to_string(runs)});
    files.push_back(path);
  }
}

}  // namespace

void write_trace_csv(const RunTrace& trace, const std::string& path) {
  CsvWriter out(path);
  if (!out.ok()) throw ModelError("trace: cannot write " + path);
  out.row({"t", "rate", "util", "borrow", "supply", "price", "collateral_factor",
           "liq_threshold", "a_b_hat", "b_b_hat", "a_l_hat", "b_l_hat", "rho",
           "p_b_00", "p_b_11", "p_l_00", "p_l_11", "pred_demand", "pred_supply",
           "true_a_b", "true_b_b", "true_a_l", "true_b_l"});
  for (const auto& r : trace.rows)
    out.row({std::to_string(r.t), fmt_double(r.rate), fmt_double(r.util),
             fmt_double(r.borrow), fmt_double(r.supply), fmt_double(r.price),
             fmt_double(r.collateral_factor), fmt_double(r.liq_threshold),
             fmt_double(r.a_b_hat), fmt_double(r.b_b_hat), fmt_double(r.a_l_hat),
             fmt_double(r.b_l_hat), fmt_double(r.rho), fmt_double(r.p_b_00),
             fmt_double(r.p_b_11), fmt_double(r.p_l_00), fmt_double(r.p_l_11),
             fmt_double(r.pred_demand), fmt_double(r.pred_supply),
             fmt_double(r.true_params.a_b), fmt_double(r.true_params.b_b),
             fmt_double(r.true_params.a_l), fmt_double(r.true_params.b_l)});
}

RunTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("trace: cannot open " + path);
  RunTrace trace;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto c = split_csv_line(line);
    if (c.size() != 23) throw ModelError("trace: malformed row in " + path);
    TraceRow r;
    r.t = std::stol(c[0]);
    r.rate = std::stod(c[1]);
    r.util = std::stod(c[2]);
    r.borrow = std::stod(c[3]);
    r.supply = std::stod(c[4]);
    r.price = std::stod(c[5]);
    r.collateral_factor = std::stod(c[6]);
    r.liq_threshold = std::stod(c[7]);
    r.a_b_hat = std::stod(c[8]);
    r.b_b_hat = std::stod(c[9]);
    r.a_l_hat = std::stod(c[10]);
    r.b_l_hat = std::stod(c[11]);
    r.rho = std::stod(c[12]);
    r.p_b_00 = std::stod(c[13]);
    r.p_b_11 = std::stod(c[14]);
    r.p_l_00 = std::stod(c[15]);
    r.p_l_11 = std::stod(c[16]);
    r.pred_demand = std::stod(c[17]);
    r.pred_supply = std::stod(c[18]);
    r.true_params.a_b = std::stod(c[19]);
    r.true_params.b_b = std::stod(c[20]);
    r.true_params.a_l = std::stod(c[21]);
    r.true_params.b_l = std::stod(c[22]);
    trace.rows.push_back(r);
  }
  return trace;
}

void write_series_csv(const RunTrace& trace, double slot_duration,
                      const std::string& path) {
  CsvWriter out(path);
  if (!out.ok()) throw ModelError("series: cannot write " + path);
  out.row({"timestamp", "borrow_total", "supply_total", "borrow_rate",
           "supply_rate", "utilization"});
  for (const auto& r : trace.rows)
    out.row({fmt_double(static_cast<double>(r.t) * slot_duration),
             fmt_double(r.borrow), fmt_double(r.supply), fmt_double(r.rate),
             fmt_double(r.rate * r.util), fmt_double(r.util)});
}

SimulateOutput cmd_simulate(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  ensure_dir(cfg.output.dir);
  SimulateOutput out;

  std::vector<RunTrace> traces;
  out.result = run_scenario(cfg, threads, &traces);

  const std::string cfg_path = join(cfg.output.dir, "effective_config.json");
  {
    std::ofstream f(cfg_path, std::ios::binary);
    f << dump_config(cfg);
  }
  out.files.push_back(cfg_path);

  if (cfg.output.write_traces) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const std::string tp =
          join(cfg.output.dir, "trace_run" + std::to_string(i) + ".csv");
      write_trace_csv(traces[i], tp);
      out.files.push_back(tp);
      const std::string sp =
          join(cfg.output.dir, "series_run" + std::to_string(i) + ".csv");
      write_series_csv(traces[i], 10800.0, sp);
      out.files.push_back(sp);
    }
  }
  write_report(cfg.output.dir, cfg.output.format, out.result.aggregated, cfg.runs,
               out.files);
  return out;
}

ScenarioConfig apply_axis(const ScenarioConfig& cfg, const std::string& axis,
                          double value) {
  ScenarioConfig next = cfg;
  if (axis == "market.trajectory.sigma_trns") next.market.trajectory.sigma_trns = value;
  else if (axis == "market.noise_sd") next.market.noise_sd = value;
  else if (axis == "estimator.rho") next.estimator.rho = value;
  else if (axis == "adversary.sigma_attack")
    next.adversary.intermittent.sigma_attack = value;
  else if (axis == "adversary.gamma_adv") next.adversary.persistent.gamma_adv = value;
  else if (axis == "adversary.activation_prob") {
    next.adversary.intermittent.activation_prob = value;
    next.adversary.persistent.activation_prob = value;
  } else if (axis == "controller.target_util") next.controller.target_util = value;
  else if (axis == "market.heston.xi") next.market.heston.xi = value;
  else
    throw ConfigError("sweep axis: unresolvable path '" + axis + "'");
  return next;
}

SweepOutput cmd_sweep(const ScenarioConfig& cfg, const std::string& axis,
                      const std::vector<double>& values, int threads) {
  cfg.validate();
  if (values.empty()) throw ConfigError("sweep: empty value list");
  ensure_dir(cfg.output.dir);
  SweepOutput out;
  for (double v : values) {
    const ScenarioConfig point_cfg = apply_axis(cfg, axis, v);
    point_cfg.validate();
    auto result = run_scenario(point_cfg, threads);
    out.points.push_back({v, result.aggregated});
  }
  const std::string path = join(cfg.output.dir, "sweep.csv");
  CsvWriter w(path);
  w.row({"axis", "value", "metric", "mean", "stderr", "runs"});
  const auto& names = metric_names();
  for (const auto& pt : out.points)
    for (std::size_t i = 0; i < names.size(); ++i)
      w.row({axis, fmt_double(pt.value), names[i], fmt_double(pt.aggregated[i].mean),
             fmt_double(pt.aggregated[i].stderr_), std::to_string(cfg.runs)});
  out.file = path;
  return out;
}

AdversaryOutput cmd_adversary(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  if (cfg.adversary.kind == AttackKind::kNone)
    throw ConfigError("adversary.kind: none configured for the adversary command");
  ensure_dir(cfg.output.dir);
  AdversaryOutput out;
  out.impact = measure_adversarial_impact(cfg, threads);

  Json j;
  j["measured_gap"] = out.impact.measured_gap;
  j["bound"] = out.impact.bound;
  j["bound_name"] = out.impact.bound_name;
  j["per_run_gap"] = out.impact.per_run_gap;
  const std::string path = join(cfg.output.dir, "adversary.json");
  std::ofstream f(path, std::ios::binary);
  f << j.dump(2) << '\n';
  out.file = path;
  return out;
}

RiskOutput cmd_risk(const ScenarioConfig& cfg, const RiskTargets& targets,
                    long horizon, const std::vector<double>* sigma_series) {
  cfg.validate();
  ensure_dir(cfg.output.dir);
  const double lt = targets.lt_fixed.value_or(cfg.market.risk.liq_threshold);

  std::vector<double> sigmas;
  if (sigma_series) {
    sigmas = *sigma_series;
  } else {
    Rng rng = Rng::for_run(cfg.base_seed, 0, 0x7269736b00000000ULL);
    PriceState price{cfg.market.heston.p0, cfg.market.heston.var0};
    for (long t = 0; t < horizon; ++t) {
      price = step_price(price, cfg.market.heston, rng);
      sigmas.push_back(std::sqrt(price.var));
    }
  }

  RiskOutput out;
  for (std::size_t t = 0; t < sigmas.size(); ++t) {
    RiskPoint pt;
    pt.t = static_cast<long>(t);
    pt.sigma = sigmas[t];
    if (pt.sigma <= 0) {
      pt.collateral_factor = lt * (1.0 - 1e-9);
      pt.expected_liq = 0.0;
    } else {
      try {
        pt.collateral_factor =
            solve_collateral_factor(targets, lt, cfg.market.heston.mu, pt.sigma);
        pt.expected_liq = expected_liquidation(lt, pt.collateral_factor,
                                               cfg.market.heston.mu, pt.sigma);
      } catch (const InfeasibleError&) {
        pt.feasible = false;
        pt.collateral_factor = 0.0;
        pt.expected_liq = 0.0;
      }
    }
    out.points.push_back(pt);
  }

  const std::string path = join(cfg.output.dir, "risk.csv");
  CsvWriter w(path);
  w.row({"t", "sigma", "collateral_factor", "expected_liq", "feasible"});
  for (const auto& pt : out.points)
    w.row({std::to_string(pt.t), fmt_double(pt.sigma),
           fmt_double(pt.collateral_factor), fmt_double(pt.expected_liq),
           pt.feasible ? "1" : "0"});
  out.file = path;
  return out;
}

FitOutput cmd_fit(const std::string& data_path, const std::string& out_dir,
                  double rho, int max_delta, const LoadOptions& opts) {
  ensure_dir(out_dir);
  const PoolSeries series = load_series(data_path, opts);
  FitOutput out;
  out.lags = lag_search(series, rho, 1, max_delta);
  out.fit = fit_series(series, out.lags.best_delta_demand,
                       out.lags.best_delta_supply, rho);

  const std::string lag_path = join(out_dir, "lag_table.csv");
  {
    CsvWriter w(lag_path);
    w.row({"delta", "demand_mse", "supply_mse"});
    for (std::size_t i = 0; i < out.lags.demand_mse.size(); ++i)
      w.row({std::to_string(out.lags.min_delta + static_cast<int>(i)),
             fmt_double(out.lags.demand_mse[i]), fmt_double(out.lags.supply_mse[i])});
  }
  out.files.push_back(lag_path);

  const std::string traj_path = join(out_dir, "fit_trajectory.csv");
  write_fit_trajectory(out.fit, traj_path);
  out.files.push_back(traj_path);

  Json j;
  j["best_delta_demand"] = out.lags.best_delta_demand;
  j["best_delta_supply"] = out.lags.best_delta_supply;
  j["demand_norm_error"] = out.fit.report.demand_norm_error;
  j["supply_norm_error"] = out.fit.report.supply_norm_error;
  j["slots"] = out.fit.report.slots;
  const std::string rep_path = join(out_dir, "fit_report.json");
  std::ofstream f(rep_path, std::ios::binary);
  f << j.dump(2) << '\n';
  out.files.push_back(rep_path);
  return out;
}

}  // namespace lendsim
