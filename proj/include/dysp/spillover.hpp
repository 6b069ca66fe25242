#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/fevd.hpp"
#include "dysp/panel.hpp"
#include "dysp/var.hpp"
#include "dysp/year_series.hpp"

namespace dysp {

/// Spillover table in percentage points.
///
/// fevd.d(i, j) is the directed spillover from i to j. to_others holds the
/// off-diagonal row sums, from_others the off-diagonal column sums, and total
/// their common mean.
struct SpilloverTable {
  std::vector<std::string> labels;
  FevdMatrix fevd;
  Eigen::VectorXd to_others;
  Eigen::VectorXd from_others;
  Eigen::VectorXd net;
  double total = 0.0;

  [[nodiscard]] Eigen::Index size() const { return fevd.d.rows(); }
};

inline SpilloverTable spillover_table(const FevdMatrix& d, std::vector<std::string> labels = {}) {
  if (d.method != FevdMethod::cholesky && !d.normalized)
    throw ConfigError("spillover table needs a normalized FEVD; normalize generalized shares first");
  const Eigen::Index n = d.d.rows();
  if (labels.empty())
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back("y" + std::to_string(i + 1));
  if (static_cast<Eigen::Index>(labels.size()) != n) throw DataError("label count differs from FEVD size");
  SpilloverTable t;
  t.labels = std::move(labels);
  t.fevd = d;
  t.fevd.d = d.d * 100.0;
  const Eigen::VectorXd diag = t.fevd.d.diagonal();
  t.to_others = t.fevd.d.rowwise().sum() - diag;
  t.from_others = t.fevd.d.colwise().sum().transpose() - diag;
  t.net = t.to_others - t.from_others;
  t.total = (t.fevd.d.sum() - diag.sum()) / static_cast<double>(n);
  return t;
}

/// Net pairwise spillover from i to j: d(i, j) - d(j, i).
inline double net_pairwise(const SpilloverTable& t, Eigen::Index i, Eigen::Index j) {
  if (i == j) throw ConfigError("net pairwise spillover needs two distinct locations");
  if (i < 0 || j < 0 || i >= t.size() || j >= t.size()) throw ConfigError("location index out of range");
  return t.fevd.d(i, j) - t.fevd.d(j, i);
}

struct SpilloverOptions {
  int p = 1;
  int horizon = 10;
  FevdMethod method = FevdMethod::generalized;
  bool normalize = true;
  VarOptions var;
  unsigned workers = 1;
};

/// Fit, decompose and tabulate in one step.
inline SpilloverTable spillover_from_panel(const PricePanel& panel, const SpilloverOptions& o) {
  const VarModel m = fit_var(panel, o.p, o.var);
  FevdMatrix d = fevd(m, o.horizon, o.method);
  if (o.normalize && o.method != FevdMethod::cholesky) d = normalize_rows_to_target(d);
  return spillover_table(d, panel.locations());
}

/// Throws ConfigError unless a window of `window` rows supports a VAR(p) on
/// n_series series and fits inside `available` rows.
inline void check_window(int window, int n_series, int available, const SpilloverOptions& o) {
  const int need = min_var_rows(n_series, o.p, o.var.intercept);
  if (window < need)
    throw ConfigError("rolling window " + std::to_string(window) + " is infeasible for VAR(" +
                      std::to_string(o.p) + ") on " + std::to_string(n_series) +
                      " series: rank deficiency (curse of dimensionality), need at least " +
                      std::to_string(need) + " years");
  if (window > available)
    throw ConfigError("rolling window " + std::to_string(window) + " exceeds the " +
                      std::to_string(available) + " available years");
}

/// Spillover tables over trailing windows, keyed by each window's last year.
struct RollingSpillover {
  int window = 0;
  std::vector<int> end_years;
  std::vector<std::optional<SpilloverTable>> tables;  // nullopt where the fit failed
  std::vector<std::string> failures;                  // reason per gap, empty otherwise

  [[nodiscard]] std::vector<std::optional<double>> index() const {
    std::vector<std::optional<double>> v;
    for (const auto& t : tables) v.push_back(t ? std::optional<double>(t->total) : std::nullopt);
    return v;
  }
};

inline RollingSpillover rolling_spillover(const PricePanel& panel, int window,
                                          const SpilloverOptions& o) {
  check_window(window, static_cast<int>(panel.cols()), static_cast<int>(panel.rows()), o);
  const auto count = static_cast<std::size_t>(panel.rows() - window + 1);
  RollingSpillover r;
  r.window = window;
  r.tables.resize(count);
  r.failures.resize(count);
  for (std::size_t k = 0; k < count; ++k)
    r.end_years.push_back(panel.years()[k + static_cast<std::size_t>(window) - 1]);
  detail::parallel_for(count, o.workers, [&](std::size_t k) {
    try {
      r.tables[k] = spillover_from_panel(panel.slice_rows(static_cast<Eigen::Index>(k), window), o);
    } catch (const NumericalError& e) {
      r.failures[k] = e.what();
    }
  });
  return r;
}

/// Mean total-spillover index across several window lengths, aligned by end year.
struct AveragedIndex {
  std::vector<int> years;
  std::vector<std::optional<double>> value;
  std::vector<int> n_windows;
};

inline AveragedIndex average_rolling(const std::vector<RollingSpillover>& runs) {
  if (runs.empty()) throw ConfigError("window set is empty");
  std::set<int> years;
  for (const auto& r : runs) years.insert(r.end_years.begin(), r.end_years.end());
  AveragedIndex out;
  out.years.assign(years.begin(), years.end());
  const int first = out.years.front();
  std::vector<double> sum(out.years.size(), 0.0);
  out.n_windows.assign(out.years.size(), 0);
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < r.end_years.size(); ++k) {
      if (!r.tables[k]) continue;
      const auto slot = static_cast<std::size_t>(r.end_years[k] - first);
      sum[slot] += r.tables[k]->total;
      ++out.n_windows[slot];
    }
  }
  for (std::size_t s = 0; s < sum.size(); ++s)
    out.value.push_back(out.n_windows[s] > 0 ? std::optional<double>(sum[s] / out.n_windows[s])
                                             : std::nullopt);
  return out;
}

inline YearSeries to_year_series(const AveragedIndex& idx) { return {idx.years, idx.value}; }

inline AveragedIndex average_over_windows(const PricePanel& panel, const std::vector<int>& windows,
                                          const SpilloverOptions& o,
                                          std::vector<RollingSpillover>* runs_out = nullptr) {
  if (windows.empty()) throw ConfigError("window set is empty");
  for (int w : windows)
    check_window(w, static_cast<int>(panel.cols()), static_cast<int>(panel.rows()), o);
  std::vector<RollingSpillover> runs;
  for (int w : windows) runs.push_back(rolling_spillover(panel, w, o));
  auto avg = average_rolling(runs);
  if (runs_out) *runs_out = std::move(runs);
  return avg;
}

// ---- serialization --------------------------------------------------------

/// Table layout: N x N block with a "To Others" column, a "From Others" row
/// and the total in the corner cell.
inline void write_spillover_table(std::ostream& out, const SpilloverTable& t, char delim = ',') {
  const Eigen::Index n = t.size();
  for (const auto& l : t.labels) out << delim << detail::quote_field(l, delim);
  out << delim << "To Others\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out << detail::quote_field(t.labels[static_cast<std::size_t>(i)], delim);
    for (Eigen::Index j = 0; j < n; ++j) out << delim << detail::fmt_num(t.fevd.d(i, j));
    out << delim << detail::fmt_num(t.to_others(i)) << '\n';
  }
  out << "From Others";
  for (Eigen::Index j = 0; j < n; ++j) out << delim << detail::fmt_num(t.from_others(j));
  out << delim << detail::fmt_num(t.total) << '\n';
}

inline nlohmann::ordered_json spillover_table_to_json(const SpilloverTable& t) {
  const auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::ordered_json j;
  j["format"] = "dysp.spillover_table";
  j["version"] = 1;
  j["method"] = to_string(t.fevd.method);
  j["horizon"] = t.fevd.horizon;
  j["normalized"] = t.fevd.normalized;
  j["units"] = "percentage points";
  j["labels"] = t.labels;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < t.size(); ++i) rows.push_back(vec(t.fevd.d.row(i).transpose()));
  j["spillover"] = rows;
  j["to_others"] = vec(t.to_others);
  j["from_others"] = vec(t.from_others);
  j["net"] = vec(t.net);
  j["total"] = t.total;
  return j;
}

/// Rebuilds a table from its structured form (aggregates are recomputed).
inline SpilloverTable spillover_table_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", "") != "dysp.spillover_table" || j.value("version", 0) != 1)
    throw DataError("not a version-1 dysp.spillover_table document");
  const auto labels = j.at("labels").get<std::vector<std::string>>();
  const auto n = static_cast<Eigen::Index>(labels.size());
  FevdMatrix d;
  d.horizon = j.at("horizon").get<int>();
  d.method = parse_fevd_method(j.at("method").get<std::string>());
  d.normalized = j.at("normalized").get<bool>();
  d.d.resize(n, n);
  const auto& rows = j.at("spillover");
  if (static_cast<Eigen::Index>(rows.size()) != n) throw DataError("spillover block size mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = rows[static_cast<std::size_t>(i)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != n) throw DataError("spillover block size mismatch");
    for (Eigen::Index k = 0; k < n; ++k) d.d(i, k) = r[static_cast<std::size_t>(k)] / 100.0;
  }
  if (d.method != FevdMethod::cholesky) d.normalized = true;
  return spillover_table(d, labels);
}

/// (year, value, n_windows) rows; missing values are written as NA.
inline void write_index_series(std::ostream& out, const AveragedIndex& idx, char delim = ',') {
  out << "year" << delim << "value" << delim << "n_windows\n";
  for (std::size_t k = 0; k < idx.years.size(); ++k)
    out << idx.years[k] << delim << (idx.value[k] ? detail::fmt_num(*idx.value[k]) : "NA") << delim
        << idx.n_windows[k] << '\n';
}

/// Reads the (year, value[, n_windows]) layout written by write_index_series.
inline YearSeries read_index_series(std::istream& in, char delim = ',') {
  std::string line;
  if (!std::getline(in, line)) throw DataError("index series is empty");
  const auto header = detail::split_row(line, delim);
  if (header.size() < 2 || header[0] != "year") throw DataError("index series must start with a year column");
  YearSeries s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_row(line, delim);
    long long year = 0;
    double v = 0;
    if (f.size() < 2 || !detail::parse_int(f[0], year))
      throw DataError("index series row " + std::to_string(lineno) + ": malformed year");
    if (!s.years.empty() && year != s.years.back() + 1)
      throw DataError("index series row " + std::to_string(lineno) + ": years must be consecutive");
    s.years.push_back(static_cast<int>(year));
    if (f[1] == "NA" || f[1].empty()) s.values.emplace_back(std::nullopt);
    else if (detail::parse_double(f[1], v)) s.values.emplace_back(v);
    else throw DataError("index series row " + std::to_string(lineno) + ": malformed value '" + f[1] + "'");
  }
  if (s.years.empty()) throw DataError("index series has no rows");
  return s;
}

inline void write_rolling_index(std::ostream& out, const RollingSpillover& r, char delim = ',') {
  write_index_series(out, average_rolling({r}), delim);
}

/// Per-location net spillover by window end year (one column per location).
inline void write_rolling_net(std::ostream& out, const RollingSpillover& r,
                              const std::vector<std::string>& labels, char delim = ',') {
  out << "year";
  for (const auto& l : labels) out << delim << detail::quote_field(l, delim);
  out << '\n';
  for (std::size_t k = 0; k < r.end_years.size(); ++k) {
    out << r.end_years[k];
    for (std::size_t c = 0; c < labels.size(); ++c)
      out << delim
          << (r.tables[k] ? detail::fmt_num(r.tables[k]->net(static_cast<Eigen::Index>(c))) : "NA");
    out << '\n';
  }
}

}  // namespace dysp
