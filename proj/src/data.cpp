#include "lendsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lendsim/csv.hpp"
#include "lendsim/errors.hpp"

namespace lendsim {

namespace {

const std::vector<std::string> kColumns = {"timestamp",   "borrow_total",
                                           "supply_total", "borrow_rate",
                                           "supply_rate",  "utilization"};

[[noreturn]] void row_error(long row, const std::string& what) {
  throw ModelError("pool series row " + std::to_string(row) + ": " + what);
}

}  // namespace

PoolSeries load_series(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ModelError("pool series: cannot open " + path);

  PoolSeries series;
  series.slot_duration = opts.slot_duration;
  std::string line;
  long line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (!header_seen) {
      if (cells.size() != kColumns.size())
        row_error(line_no, "expected header " + std::string("timestamp,borrow_total,"
                  "supply_total,borrow_rate,supply_rate,utilization"));
      for (std::size_t i = 0; i < kColumns.size(); ++i)
        if (cells[i] != kColumns[i])
          row_error(line_no, "unexpected column '" + cells[i] + "' (want '" +
                                 kColumns[i] + "')");
      header_seen = true;
      continue;
    }
    if (cells.size() != kColumns.size())
      row_error(line_no, "expected 6 fields, got " + std::to_string(cells.size()));
    PoolSeriesRow r;
    try {
      r.timestamp = std::stod(cells[0]);
      r.borrow_total = std::stod(cells[1]);
      r.supply_total = std::stod(cells[2]);
      r.borrow_rate = std::stod(cells[3]);
      if (!cells[4].empty()) {
        r.supply_rate = std::stod(cells[4]);
        r.has_supply_rate = true;
      }
      r.utilization = cells[5].empty()
                          ? (r.supply_total > 0 ? r.borrow_total / r.supply_total : 0.0)
                          : std::stod(cells[5]);
    } catch (const std::exception&) {
      row_error(line_no, "unparseable numeric field");
    }
    if (!std::isfinite(r.timestamp) || !std::isfinite(r.borrow_total) ||
        !std::isfinite(r.supply_total) || !std::isfinite(r.borrow_rate))
      row_error(line_no, "non-finite value");
    if (r.borrow_total < 0 || r.supply_total < 0)
      row_error(line_no, "negative totals");
    if (r.utilization < 0 || r.utilization > 1 + 1e-9)
      row_error(line_no, "utilization outside [0,1]");
    if (!series.rows.empty() && r.timestamp <= series.rows.back().timestamp)
      row_error(line_no, "timestamps must strictly increase");
    series.rows.push_back(r);
  }
  if (!header_seen) throw ModelError("pool series: missing header in " + path);
  if (series.rows.empty()) throw ModelError("pool series: empty after validation");

  // Resample to the slot grid; forward-fill interior gaps.
  std::vector<PoolSeriesRow> grid;
  grid.push_back(series.rows.front());
  for (std::size_t i = 1; i < series.rows.size(); ++i) {
    const double expected = grid.back().timestamp + opts.slot_duration;
    double gap = series.rows[i].timestamp - expected;
    if (gap > 1e-6) {
      if (opts.error_on_gap)
        row_error(static_cast<long>(i) + 2, "gap before this row (error_on_gap set)");
      while (grid.back().timestamp + opts.slot_duration <
             series.rows[i].timestamp - 1e-6) {
        PoolSeriesRow fill = grid.back();
        fill.timestamp += opts.slot_duration;
        grid.push_back(fill);
      }
    }
    grid.push_back(series.rows[i]);
  }
  series.rows = std::move(grid);
  return series;
}

namespace {

struct CurveStream {
  // Regressor value at slot t for a given lag, plus the target.
  double x(const PoolSeries& s, std::size_t t, int delta, bool demand) const {
    const auto& lagged = s.rows[t - static_cast<std::size_t>(delta)];
    if (demand) return lagged.borrow_rate;
    const double rate = lagged.has_supply_rate ? lagged.supply_rate : lagged.borrow_rate;
    return rate * lagged.utilization;
  }
  double y(const PoolSeries& s, std::size_t t, bool demand) const {
    return demand ? s.rows[t].borrow_total : s.rows[t].supply_total;
  }
};

// Updates start at the common slot max_delta so every candidate lag sees the
// same targets; exact ties (constant-rate series) then break to the smallest.
double lag_mse(const PoolSeries& series, double rho, int delta, int start,
               int warmup, bool demand) {
  CurveStream stream;
  EstimatorState est;
  est.rho = rho;
  double acc = 0;
  long n = 0;
  for (std::size_t t = static_cast<std::size_t>(start); t < series.rows.size(); ++t) {
    const Observation obs{{stream.x(series, t, delta, demand), 1.0},
                          stream.y(series, t, demand)};
    const double pred = dot(obs.x, est.theta);
    if (static_cast<long>(t) >= start + warmup) {
      const double err = pred - obs.y;
      acc += err * err;
      ++n;
    }
    est = rls_update(est, obs);
  }
  return n > 0 ? acc / static_cast<double>(n) : std::numeric_limits<double>::infinity();
}

}  // namespace

LagSearchResult lag_search(const PoolSeries& series, double rho, int min_delta,
                           int max_delta, int warmup) {
  if (static_cast<long>(series.rows.size()) <= max_delta + warmup)
    throw ModelError("lag_search: series too short for max delta plus warmup");
  LagSearchResult result;
  result.min_delta = min_delta;
  for (int d = min_delta; d <= max_delta; ++d) {
    result.demand_mse.push_back(lag_mse(series, rho, d, max_delta, warmup, true));
    result.supply_mse.push_back(lag_mse(series, rho, d, max_delta, warmup, false));
  }
  auto argmin = [&](const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
      if (v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(best)]) best = i;
    return best + min_delta;  // strict '<' breaks ties to the smallest delta
  };
  result.best_delta_demand = argmin(result.demand_mse);
  result.best_delta_supply = argmin(result.supply_mse);
  return result;
}

FitResult fit_series(const PoolSeries& series, int delta_demand, int delta_supply,
                     double rho, int warmup) {
  const int max_delta = std::max(delta_demand, delta_supply);
  if (static_cast<long>(series.rows.size()) <= max_delta + 1)
    throw ModelError("fit_series: series too short for the requested lags");
  CurveStream stream;
  EstimatorState demand_est, supply_est;
  demand_est.rho = rho;
  supply_est.rho = rho;

  FitResult fit;
  double abs_d = 0, abs_s = 0, mean_d = 0, mean_s = 0;
  long n = 0;
  for (std::size_t t = static_cast<std::size_t>(max_delta); t < series.rows.size();
       ++t) {
    const Observation dob{{stream.x(series, t, delta_demand, true), 1.0},
                          stream.y(series, t, true)};
    const Observation sob{{stream.x(series, t, delta_supply, false), 1.0},
                          stream.y(series, t, false)};
    if (static_cast<long>(t) >= max_delta + warmup) {
      abs_d += std::abs(dot(dob.x, demand_est.theta) - dob.y);
      abs_s += std::abs(dot(sob.x, supply_est.theta) - sob.y);
      mean_d += dob.y;
      mean_s += sob.y;
      ++n;
    }
    demand_est = rls_update(demand_est, dob);
    supply_est = rls_update(supply_est, sob);
    fit.trajectory.push_back({series.rows[t].timestamp, demand_est.a_b_hat(),
                              demand_est.b_b_hat(), supply_est.a_l_hat(),
                              supply_est.b_l_hat(), demand_est.p.m00,
                              demand_est.p.m11, supply_est.p.m00, supply_est.p.m11});
  }
  fit.report.slots = n;
  fit.report.demand_norm_error = (n > 0 && mean_d > 0) ? abs_d / mean_d : 0.0;
  fit.report.supply_norm_error = (n > 0 && mean_s > 0) ? abs_s / mean_s : 0.0;
  return fit;
}

void write_fit_trajectory(const FitResult& fit, const std::string& path) {
  CsvWriter out(path);
  if (!out.ok()) throw ModelError("fit trajectory: cannot write " + path);
  out.row({"timestamp", "a_b_hat", "b_b_hat", "a_l_hat", "b_l_hat", "p_b_00",
           "p_b_11", "p_l_00", "p_l_11"});
  for (const auto& r : fit.trajectory)
    out.row({fmt_double(r.timestamp), fmt_double(r.a_b_hat), fmt_double(r.b_b_hat),
             fmt_double(r.a_l_hat), fmt_double(r.b_l_hat), fmt_double(r.p_b_00),
             fmt_double(r.p_b_11), fmt_double(r.p_l_00), fmt_double(r.p_l_11)});
}

}  // namespace lendsim
