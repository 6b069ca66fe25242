#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

#include "dysp/conflict.hpp"
#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/year_series.hpp"

namespace dysp {

/// Response, regressors (first column the intercept) and the year of each row.
struct RegressionDesign {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
  std::vector<int> years;

  [[nodiscard]] Eigen::Index n() const { return X.rows(); }
  [[nodiscard]] Eigen::Index k() const { return X.cols(); }
};

/// spillover_t = b0 + b1 log(fatalities_t) + b2 cpi_t on the years where all
/// three series are present, fatalities are positive and no exclusion applies.
inline RegressionDesign build_design(const YearSeries& spillover, const FatalitySeries& fatalities,
                                     const YearSeries& cpi,
                                     const std::vector<YearRange>& exclusions = {}) {
  std::vector<int> years;
  std::vector<double> ys, lf, cp;
  for (std::size_t k = 0; k < spillover.years.size(); ++k) {
    const int year = spillover.years[k];
    const auto s = spillover.values[k];
    const auto c = cpi.at(year);
    const double f = fatalities.at(year);
    if (!s || !c || !(f > 0.0) || in_any(exclusions, year)) continue;
    years.push_back(year);
    ys.push_back(*s);
    lf.push_back(std::log(f));
    cp.push_back(*c);
  }
  if (years.empty()) throw NumericalError("regression design is empty after filtering");
  RegressionDesign d;
  const auto n = static_cast<Eigen::Index>(years.size());
  d.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  d.X.resize(n, 3);
  d.X.col(0).setOnes();
  d.X.col(1) = Eigen::Map<const Eigen::VectorXd>(lf.data(), n);
  d.X.col(2) = Eigen::Map<const Eigen::VectorXd>(cp.data(), n);
  d.labels = {"(Intercept)", "log(Fatalities)", "CPI"};
  d.years = std::move(years);
  return d;
}

/// Least-squares solution with what the covariance estimators need.
struct OlsFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
  Eigen::MatrixXd X;
  double sigma2 = 0.0;  // RSS / (n - k)
};

inline OlsFit ols_fit(const RegressionDesign& d) {
  const Eigen::Index n = d.n(), k = d.k();
  if (n <= k) throw NumericalError("OLS needs more rows than regressors");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
  if (qr.rank() < k) throw NumericalError("OLS design is rank deficient");
  OlsFit f;
  f.X = d.X;
  f.coefficients = qr.solve(d.y);
  f.residuals = d.y - d.X * f.coefficients;
  f.xtx_inv = (d.X.transpose() * d.X).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  f.sigma2 = f.residuals.squaredNorm() / static_cast<double>(n - k);
  return f;
}

inline Eigen::MatrixXd classical_cov(const OlsFit& f) { return f.sigma2 * f.xtx_inv; }

/// Default Bartlett bandwidth floor(4 (n/100)^(2/9)).
inline int newey_west_default_lag(Eigen::Index n) {
  return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
}

/// HAC sandwich (X'X)^-1 S (X'X)^-1 with Bartlett weights 1 - l/(L+1).
/// No small-sample scaling, so lag 0 is exactly HC0.
inline Eigen::MatrixXd newey_west_cov(const OlsFit& f, int lag) {
  const Eigen::Index n = f.X.rows();
  if (lag < 0 || lag >= n) throw ConfigError("Newey-West lag must lie in [0, n)");
  const Eigen::MatrixXd scores = f.X.array().colwise() * f.residuals.array();  // row t: u_t x_t'
  Eigen::MatrixXd S = scores.transpose() * scores;
  for (int l = 1; l <= lag; ++l) {
    const double w = 1.0 - static_cast<double>(l) / (lag + 1.0);
    const Eigen::MatrixXd g = scores.bottomRows(n - l).transpose() * scores.topRows(n - l);
    S += w * (g + g.transpose());
  }
  const Eigen::MatrixXd v = f.xtx_inv * S * f.xtx_inv;
  return (v + v.transpose()) / 2.0;
}

inline Eigen::MatrixXd hc0_cov(const OlsFit& f) {
  Eigen::MatrixXd meat = f.X.transpose() * f.residuals.array().square().matrix().asDiagonal() * f.X;
  return f.xtx_inv * meat * f.xtx_inv;
}

/// Significance marks: *** p<0.001, ** p<0.01, * p<0.05.
inline std::string stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

struct RegressionFit {
  std::string method;  // "OLS+NeweyWest(L=3)", "Quantile(tau=0.5,B=1000)"
  std::vector<std::string> labels;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd p_values;
  Eigen::Index n = 0;
  std::optional<double> tau;
};

/// OLS with Newey-West standard errors; p-values from t(n - k).
/// lag < 0 selects the default bandwidth.
inline RegressionFit ols_newey_west(const RegressionDesign& d, int lag = -1) {
  const OlsFit f = ols_fit(d);
  if (lag < 0) lag = newey_west_default_lag(d.n());
  const Eigen::MatrixXd v = newey_west_cov(f, lag);
  RegressionFit r;
  r.method = "OLS+NeweyWest(L=" + std::to_string(lag) + ")";
  r.labels = d.labels;
  r.coefficients = f.coefficients;
  r.std_errors = v.diagonal().cwiseSqrt();
  r.n = d.n();
  const boost::math::students_t dist(static_cast<double>(d.n() - d.k()));
  r.p_values.resize(d.k());
  for (Eigen::Index i = 0; i < d.k(); ++i)
    r.p_values(i) = 2.0 * boost::math::cdf(boost::math::complement(
                              dist, std::abs(r.coefficients(i) / r.std_errors(i))));
  return r;
}

// ---- scatter summaries ----------------------------------------------------

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, t(n - 2)
  Eigen::Index n = 0;
};

inline Correlation pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 3) throw DataError("correlation needs at least 3 paired points");
  const Eigen::VectorXd xc = x.array() - x.mean(), yc = y.array() - y.mean();
  const double den = xc.norm() * yc.norm();
  if (!(den > 0.0)) throw DataError("correlation undefined for a constant series");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(xc.dot(yc) / den, -1.0, 1.0);
  const double df = static_cast<double>(c.n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));
  }
  return c;
}

enum class CurveMode { linear, restricted_cubic_spline };

/// Fitted curve y = sum_k coefficients[k] * basis_k(x) plus the correlation.
struct ScatterFit {
  CurveMode mode = CurveMode::linear;
  Correlation correlation;
  std::vector<double> knots;
  Eigen::VectorXd coefficients;

  [[nodiscard]] Eigen::RowVectorXd basis(double x) const;
  [[nodiscard]] double evaluate(double x) const { return basis(x).dot(coefficients); }
};

/// Restricted (natural) cubic spline basis: [1, x, s_1(x), ..., s_{k-2}(x)],
/// linear beyond the outer knots, nonlinear terms scaled by (t_k - t_1)^2.
inline Eigen::RowVectorXd rcs_basis(double x, const std::vector<double>& t) {
  const auto k = t.size();
  Eigen::RowVectorXd b(static_cast<Eigen::Index>(k));
  b(0) = 1.0;
  b(1) = x;
  const auto cube = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  const double tk = t[k - 1], tk1 = t[k - 2], scale = (tk - t[0]) * (tk - t[0]);
  for (std::size_t j = 0; j + 2 < k; ++j)
    b(static_cast<Eigen::Index>(j + 2)) =
        (cube(x - t[j]) - cube(x - tk1) * (tk - t[j]) / (tk - tk1) + cube(x - tk) * (tk1 - t[j]) / (tk - tk1)) /
        scale;
  return b;
}

inline Eigen::RowVectorXd ScatterFit::basis(double x) const {
  if (mode == CurveMode::linear) return Eigen::RowVector2d(1.0, x);
  return rcs_basis(x, knots);
}

inline const std::vector<double>& default_knot_quantiles() {
  static const std::vector<double> q = {0.05, 0.35, 0.65, 0.95};
  return q;
}

inline ScatterFit scatter_fit_summary(const Eigen::VectorXd& x, const Eigen::VectorXd& y, CurveMode mode,
                                      const std::vector<double>& knot_quantiles = default_knot_quantiles()) {
  ScatterFit f;
  f.mode = mode;
  if (mode == CurveMode::restricted_cubic_spline) {
    if (knot_quantiles.size() < 3) throw ConfigError("restricted cubic spline needs at least 3 knots");
    if (x.size() < static_cast<Eigen::Index>(knot_quantiles.size()) + 2)
      throw DataError("restricted cubic spline with " + std::to_string(knot_quantiles.size()) +
                      " knots needs at least " + std::to_string(knot_quantiles.size() + 2) + " points");
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    for (double q : knot_quantiles) f.knots.push_back(detail::quantile_type7(sorted, q));
    for (std::size_t j = 1; j < f.knots.size(); ++j)
      if (!(f.knots[j] > f.knots[j - 1])) throw DataError("spline knots are not distinct");
  }
  f.correlation = pearson(x, y);
  Eigen::MatrixXd B(x.size(), mode == CurveMode::linear ? 2 : static_cast<Eigen::Index>(f.knots.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) B.row(i) = f.basis(x(i));
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  if (qr.rank() < B.cols()) throw NumericalError("curve basis is rank deficient");
  f.coefficients = qr.solve(y);
  return f;
}

// ---- output ----------------------------------------------------------------

inline std::string regression_cell(const RegressionFit& f, Eigen::Index i) {
  return detail::fmt_fixed(f.coefficients(i), 3) + " (" + detail::fmt_fixed(f.std_errors(i), 3) + ")" +
         stars(f.p_values(i));
}

/// One column per fit: "estimate (se)stars" cells, then an N row.
inline void write_regression_table(std::ostream& out, const std::vector<RegressionFit>& fits,
                                   const std::vector<std::string>& column_names, char delim = ',') {
  if (fits.empty()) return;
  out << "term";
  for (const auto& c : column_names) out << delim << detail::quote_field(c, delim);
  out << '\n';
  for (std::size_t i = 0; i < fits.front().labels.size(); ++i) {
    out << detail::quote_field(fits.front().labels[i], delim);
    for (const auto& f : fits) out << delim << detail::quote_field(regression_cell(f, static_cast<Eigen::Index>(i)), delim);
    out << '\n';
  }
  out << "N";
  for (const auto& f : fits) out << delim << f.n;
  out << '\n';
}

inline nlohmann::ordered_json regression_to_json(const RegressionFit& f) {
  nlohmann::ordered_json j;
  j["method"] = f.method;
  if (f.tau) j["tau"] = *f.tau;
  j["n"] = f.n;
  auto terms = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    terms.push_back({{"term", f.labels[i]},
                     {"estimate", f.coefficients(k)},
                     {"std_error", f.std_errors(k)},
                     {"p_value", f.p_values(k)},
                     {"stars", stars(f.p_values(k))}});
  }
  j["terms"] = terms;
  return j;
}

inline nlohmann::ordered_json scatter_to_json(const ScatterFit& f) {
  nlohmann::ordered_json j;
  j["mode"] = f.mode == CurveMode::linear ? "linear" : "restricted-cubic-spline";
  j["n"] = f.correlation.n;
  j["r"] = f.correlation.r;
  j["p_value"] = f.correlation.p_value;
  j["knots"] = f.knots;
  j["coefficients"] = std::vector<double>(f.coefficients.data(), f.coefficients.data() + f.coefficients.size());
  return j;
}

}  // namespace dysp
