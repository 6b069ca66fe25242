#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/panel.hpp"

namespace dysp {

enum class AdfForm { none, constant, constant_trend };

inline std::string to_string(AdfForm f) {
  switch (f) {
    case AdfForm::none: return "none";
    case AdfForm::constant: return "constant";
    case AdfForm::constant_trend: return "constant+trend";
  }
  return "?";
}

inline AdfForm parse_adf_form(const std::string& s) {
  if (s == "none") return AdfForm::none;
  if (s == "constant" || s == "c") return AdfForm::constant;
  if (s == "constant+trend" || s == "trend" || s == "ct") return AdfForm::constant_trend;
  throw ConfigError("unknown ADF regression form '" + s + "'");
}

/// Where the statistic falls relative to the tabulated critical values.
struct PValueBound {
  enum class Relation { less_than, interval, greater_than };
  Relation relation = Relation::greater_than;
  double lo = 0.0;  // interval lower end, or the less-than level
  double hi = 0.0;  // interval upper end, or the greater-than level

  [[nodiscard]] bool rejects_at(double alpha) const {
    return relation == Relation::less_than ? lo <= alpha
                                           : relation == Relation::interval && hi <= alpha;
  }
};

inline std::string to_string(const PValueBound& b) {
  switch (b.relation) {
    case PValueBound::Relation::less_than: return "<" + detail::fmt_num(b.lo);
    case PValueBound::Relation::interval:
      return detail::fmt_num(b.lo) + "-" + detail::fmt_num(b.hi);
    case PValueBound::Relation::greater_than: return ">" + detail::fmt_num(b.hi);
  }
  return "?";
}

struct AdfResult {
  double statistic = 0.0;
  int lag_order = 0;
  PValueBound p_value_bound;
  AdfForm regression_form = AdfForm::constant;
  int n_obs = 0;  // rows in the test regression
};

namespace adf_tables {

inline constexpr std::array<double, 4> levels = {0.01, 0.025, 0.05, 0.10};
// Sample sizes of the tabulated rows; 0 stands for the asymptotic row.
inline constexpr std::array<int, 6> sizes = {25, 50, 100, 250, 500, 0};

// Dickey-Fuller tau critical values (Fuller 1976, Table 8.5.2).
inline constexpr double none[6][4] = {{-2.66, -2.26, -1.95, -1.60}, {-2.62, -2.25, -1.95, -1.61},
                                      {-2.60, -2.24, -1.95, -1.61}, {-2.58, -2.23, -1.95, -1.62},
                                      {-2.58, -2.23, -1.95, -1.62}, {-2.58, -2.23, -1.95, -1.62}};
inline constexpr double constant[6][4] = {
    {-3.75, -3.33, -3.00, -2.63}, {-3.58, -3.22, -2.93, -2.60}, {-3.51, -3.17, -2.89, -2.58},
    {-3.46, -3.14, -2.88, -2.57}, {-3.44, -3.13, -2.87, -2.57}, {-3.43, -3.12, -2.86, -2.57}};
inline constexpr double trend[6][4] = {
    {-4.38, -3.95, -3.60, -3.24}, {-4.15, -3.80, -3.50, -3.18}, {-4.04, -3.73, -3.45, -3.15},
    {-3.99, -3.69, -3.43, -3.13}, {-3.98, -3.68, -3.42, -3.13}, {-3.96, -3.66, -3.41, -3.12}};

}  // namespace adf_tables

/// Critical values at levels {1%, 2.5%, 5%, 10%} for n regression rows,
/// interpolated linearly in 1/n between tabulated sample sizes.
inline std::array<double, 4> adf_critical_values(AdfForm form, int n) {
  const auto& table = form == AdfForm::none       ? adf_tables::none
                      : form == AdfForm::constant ? adf_tables::constant
                                                  : adf_tables::trend;
  const auto inv = [](int size) { return size == 0 ? 0.0 : 1.0 / size; };
  const double x = 1.0 / std::max(n, 1);
  std::array<double, 4> cv{};
  if (x >= inv(adf_tables::sizes[0])) {
    for (int k = 0; k < 4; ++k) cv[k] = table[0][k];
    return cv;
  }
  for (int r = 0; r + 1 < 6; ++r) {
    const double x0 = inv(adf_tables::sizes[r]), x1 = inv(adf_tables::sizes[r + 1]);
    if (x <= x0 && x >= x1) {
      const double w = (x0 - x) / (x0 - x1);
      for (int k = 0; k < 4; ++k) cv[k] = table[r][k] + w * (table[r + 1][k] - table[r][k]);
      return cv;
    }
  }
  for (int k = 0; k < 4; ++k) cv[k] = table[5][k];
  return cv;
}

inline PValueBound adf_p_value_bound(double statistic, const std::array<double, 4>& cv) {
  const auto& lv = adf_tables::levels;
  if (statistic < cv[0]) return {PValueBound::Relation::less_than, lv[0], lv[0]};
  for (int k = 1; k < 4; ++k)
    if (statistic < cv[k]) return {PValueBound::Relation::interval, lv[k - 1], lv[k]};
  return {PValueBound::Relation::greater_than, lv[3], lv[3]};
}

/// Augmented Dickey-Fuller test.
///
/// Regresses dy_t on [deterministic terms, y_{t-1}, dy_{t-1}..dy_{t-lag}] by
/// least squares; the statistic is the t-ratio on y_{t-1}.
inline AdfResult adf_test(std::span<const double> series, int lag_order,
                          AdfForm form = AdfForm::constant) {
  const auto T = static_cast<int>(series.size());
  if (lag_order < 0) throw ConfigError("ADF lag order must be nonnegative");
  if (T <= 2 * (lag_order + 2))
    throw DataError("series of length " + std::to_string(T) + " too short for ADF lag order " +
                    std::to_string(lag_order));
  const int n = T - 1 - lag_order;
  const int det = form == AdfForm::none ? 0 : form == AdfForm::constant ? 1 : 2;
  const int k = det + 1 + lag_order;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd y(n);
  const auto dy = [&](int t) { return series[static_cast<std::size_t>(t)] - series[static_cast<std::size_t>(t - 1)]; };
  for (int r = 0; r < n; ++r) {
    const int t = r + lag_order + 1;  // index into series of the response dy_t
    y(r) = dy(t);
    int c = 0;
    if (det >= 1) X(r, c++) = 1.0;
    if (det >= 2) X(r, c++) = static_cast<double>(t);
    X(r, c++) = series[static_cast<std::size_t>(t - 1)];
    for (int i = 1; i <= lag_order; ++i) X(r, c++) = dy(t - i);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k) throw NumericalError("ADF regression is rank deficient");
  const Eigen::VectorXd beta = qr.solve(y);
  const double s2 = (y - X * beta).squaredNorm() / (n - k);
  const Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  const double stat = beta(det) / std::sqrt(s2 * xtx_inv(det, det));
  AdfResult res;
  res.statistic = stat;
  res.lag_order = lag_order;
  res.regression_form = form;
  res.n_obs = n;
  res.p_value_bound = adf_p_value_bound(stat, adf_critical_values(form, n));
  return res;
}

struct AdfRow {
  std::string location;
  AdfResult result;
};

inline std::vector<AdfRow> adf_by_location(const PricePanel& panel, int lag_order,
                                           AdfForm form = AdfForm::constant) {
  std::vector<AdfRow> rows;
  for (Eigen::Index c = 0; c < panel.cols(); ++c) {
    const Eigen::VectorXd col = panel.values().col(c);
    rows.push_back({panel.locations()[static_cast<std::size_t>(c)],
                    adf_test(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                             lag_order, form)});
  }
  return rows;
}

/// Location, Statistic, p-value table (plus the lag and regression form used).
inline void write_adf_table(std::ostream& out, const std::vector<AdfRow>& rows, char delim = ',') {
  out << "Location" << delim << "Statistic" << delim << "p-value" << delim << "lag" << delim
      << "form\n";
  for (const auto& r : rows)
    out << detail::quote_field(r.location, delim) << delim << detail::fmt_fixed(r.result.statistic, 2)
        << delim << to_string(r.result.p_value_bound) << delim << r.result.lag_order << delim
        << to_string(r.result.regression_form) << '\n';
}

}  // namespace dysp
