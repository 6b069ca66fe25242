#pragma once

#include <cmath>
#include <complex>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/panel.hpp"

namespace dysp {

enum class CovarianceDenominator {
  dof_adjusted,  // T_eff - K, K regressors per equation
  ml             // T_eff
};

struct VarOptions {
  bool intercept = true;
  CovarianceDenominator covariance = CovarianceDenominator::dof_adjusted;
};

/// Least-squares VAR(p): y_t = c + Phi_1 y_{t-1} + ... + Phi_p y_{t-p} + e_t.
struct VarModel {
  int p = 1;
  std::vector<std::string> labels;
  bool has_intercept = true;
  Eigen::VectorXd intercept;
  std::vector<Eigen::MatrixXd> phi;  // phi[i] is Phi_{i+1}
  Eigen::MatrixXd sigma;             // residual covariance
  int t_eff = 0;
  Eigen::MatrixXd residuals;  // T_eff x N; empty for deserialized models

  [[nodiscard]] Eigen::Index dim() const { return sigma.rows(); }
};

/// Smallest number of rows a VAR(p) on N series needs.
///
/// Residuals live in a (T_eff - K)-dimensional space, so the N x N residual
/// covariance can only be nonsingular when T_eff - K >= N.
[[nodiscard]] constexpr int min_var_rows(int n_series, int p, bool intercept = true) {
  return p + n_series * p + (intercept ? 1 : 0) + n_series;
}

namespace detail {

/// Stacked regression Y = X B for a VAR(p), using responses from row `first` on.
/// X columns: [1,] y_{t-1}', ..., y_{t-p}'.
inline void var_design(const Eigen::MatrixXd& data, int p, bool intercept, int first,
                       Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
  const Eigen::Index n = data.cols();
  const Eigen::Index rows = data.rows() - first;
  const Eigen::Index k = n * p + (intercept ? 1 : 0);
  X.resize(rows, k);
  Y = data.bottomRows(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index t = r + first;
    Eigen::Index c = 0;
    if (intercept) X(r, c++) = 1.0;
    for (int i = 1; i <= p; ++i) {
      X.block(r, c, 1, n) = data.row(t - i);
      c += n;
    }
  }
}

inline VarModel fit_var_rows(const Eigen::MatrixXd& data, const std::vector<std::string>& labels,
                             int p, const VarOptions& opts, int first) {
  const auto n = static_cast<int>(data.cols());
  const int k = n * p + (opts.intercept ? 1 : 0);
  const int t_eff = static_cast<int>(data.rows()) - first;
  if (t_eff - k < n)
    throw NumericalError(
        "curse of dimensionality: VAR(" + std::to_string(p) + ") on " + std::to_string(n) +
        " series needs at least " + std::to_string(min_var_rows(n, p, opts.intercept)) +
        " observations, got " + std::to_string(data.rows()) +
        " (rank-deficient residual covariance)");
  Eigen::MatrixXd X, Y;
  var_design(data, p, opts.intercept, first, X, Y);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < k)
    throw NumericalError("curse of dimensionality: VAR(" + std::to_string(p) +
                         ") regressor matrix is rank deficient (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(k) + ")");
  const Eigen::MatrixXd B = qr.solve(Y);
  VarModel m;
  m.p = p;
  m.labels = labels;
  m.has_intercept = opts.intercept;
  m.t_eff = t_eff;
  m.residuals = Y - X * B;
  int row = 0;
  m.intercept = opts.intercept ? Eigen::VectorXd(B.row(row++).transpose())
                               : Eigen::VectorXd::Zero(n);
  for (int i = 0; i < p; ++i, row += n) m.phi.emplace_back(B.middleRows(row, n).transpose());
  const double denom = opts.covariance == CovarianceDenominator::dof_adjusted ? t_eff - k : t_eff;
  const Eigen::MatrixXd s = m.residuals.transpose() * m.residuals / denom;
  m.sigma = (s + s.transpose()) / 2.0;
  return m;
}

}  // namespace detail

/// Fits a VAR(p) by per-equation least squares on all rows of the panel.
inline VarModel fit_var(const PricePanel& panel, int p, const VarOptions& opts = {}) {
  if (p < 1) throw ConfigError("VAR order must be at least 1");
  return detail::fit_var_rows(panel.values(), panel.locations(), p, opts, p);
}

enum class InformationCriterion { aic, bic, hq };

inline std::string to_string(InformationCriterion c) {
  switch (c) {
    case InformationCriterion::aic: return "AIC";
    case InformationCriterion::bic: return "BIC";
    case InformationCriterion::hq: return "HQ";
  }
  return "?";
}

inline InformationCriterion parse_criterion(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (s == "aic") return InformationCriterion::aic;
  if (s == "bic" || s == "sc") return InformationCriterion::bic;
  if (s == "hq") return InformationCriterion::hq;
  throw ConfigError("unknown information criterion '" + s + "'");
}

struct OrderSelection {
  InformationCriterion criterion = InformationCriterion::bic;
  std::vector<double> scores;  // scores[i] belongs to p = i + 1
  int chosen = 1;
};

/// Fits p = 1..p_max on the common sample (first p_max rows held out) and
/// picks the minimizer of the criterion; ties go to the smaller order.
inline OrderSelection select_order(const PricePanel& panel, int p_max,
                                   InformationCriterion criterion = InformationCriterion::bic,
                                   const VarOptions& opts = {}) {
  if (p_max < 1) throw ConfigError("maximum VAR order must be at least 1");
  OrderSelection sel;
  sel.criterion = criterion;
  const auto n = static_cast<double>(panel.cols());
  for (int p = 1; p <= p_max; ++p) {
    VarOptions ml = opts;
    ml.covariance = CovarianceDenominator::ml;
    const VarModel m = detail::fit_var_rows(panel.values(), panel.locations(), p, ml, p_max);
    const Eigen::LLT<Eigen::MatrixXd> llt(m.sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("order selection: residual covariance not positive definite at p=" +
                           std::to_string(p));
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double t = m.t_eff;
    const double params = n * n * p + (opts.intercept ? n : 0.0);
    double penalty = 0;
    switch (criterion) {
      case InformationCriterion::aic: penalty = 2.0 * params / t; break;
      case InformationCriterion::bic: penalty = std::log(t) * params / t; break;
      case InformationCriterion::hq: penalty = 2.0 * std::log(std::log(t)) * params / t; break;
    }
    sel.scores.push_back(logdet + penalty);
  }
  for (int p = 2; p <= p_max; ++p)
    if (sel.scores[static_cast<std::size_t>(p - 1)] <
        sel.scores[static_cast<std::size_t>(sel.chosen - 1)])
      sel.chosen = p;
  return sel;
}

/// Moving-average coefficients A_0..A_{H-1}: A_0 = I, A_h = sum_i Phi_i A_{h-i}.
struct MaCoefficients {
  std::vector<Eigen::MatrixXd> A;
  [[nodiscard]] int horizon() const { return static_cast<int>(A.size()); }
};

inline MaCoefficients ma_coefficients(const VarModel& model, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  const Eigen::Index n = model.dim();
  MaCoefficients ma;
  ma.A.push_back(Eigen::MatrixXd::Identity(n, n));
  for (int h = 1; h < horizon; ++h) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i <= std::min(h, model.p); ++i)
      a.noalias() += model.phi[static_cast<std::size_t>(i - 1)] * ma.A[static_cast<std::size_t>(h - i)];
    ma.A.push_back(std::move(a));
  }
  return ma;
}

inline Eigen::MatrixXd companion_matrix(const VarModel& model) {
  const Eigen::Index n = model.dim();
  const Eigen::Index np = n * model.p;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(np, np);
  for (int i = 0; i < model.p; ++i) c.block(0, i * n, n, n) = model.phi[static_cast<std::size_t>(i)];
  if (model.p > 1) c.bottomLeftCorner(np - n, np - n).setIdentity();
  return c;
}

struct Stability {
  double spectral_radius = 0.0;
  bool stable = true;  // spectral radius < 1
};

inline Stability stability_check(const VarModel& model) {
  const Eigen::EigenSolver<Eigen::MatrixXd> es(companion_matrix(model), false);
  const double r = es.eigenvalues().cwiseAbs().maxCoeff();
  return {r, r < 1.0};
}

// Structured document: {"format": "dysp.var_model", "version": 1, ...},
// matrices stored row-major as flat arrays.
inline nlohmann::ordered_json var_model_to_json(const VarModel& m) {
  const auto flat = [](const Eigen::MatrixXd& a) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) v.push_back(a(i, j));
    return v;
  };
  nlohmann::ordered_json j;
  j["format"] = "dysp.var_model";
  j["version"] = 1;
  j["labels"] = m.labels;
  j["p"] = m.p;
  j["t_eff"] = m.t_eff;
  j["intercept_included"] = m.has_intercept;
  j["intercept"] = std::vector<double>(m.intercept.data(), m.intercept.data() + m.intercept.size());
  auto phis = nlohmann::ordered_json::array();
  for (const auto& a : m.phi) phis.push_back(flat(a));
  j["phi"] = phis;
  j["sigma"] = flat(m.sigma);
  return j;
}

inline VarModel var_model_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", "") != "dysp.var_model" || j.value("version", 0) != 1)
    throw DataError("not a version-1 dysp.var_model document");
  VarModel m;
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.p = j.at("p").get<int>();
  m.t_eff = j.at("t_eff").get<int>();
  m.has_intercept = j.at("intercept_included").get<bool>();
  const auto n = static_cast<Eigen::Index>(m.labels.size());
  const auto unflat = [n](const std::vector<double>& v) {
    if (static_cast<Eigen::Index>(v.size()) != n * n) throw DataError("matrix size mismatch");
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) a(i, k) = v[static_cast<std::size_t>(i * n + k)];
    return a;
  };
  const auto c = j.at("intercept").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(c.size()) != n) throw DataError("intercept size mismatch");
  m.intercept = Eigen::Map<const Eigen::VectorXd>(c.data(), n);
  for (const auto& a : j.at("phi")) m.phi.push_back(unflat(a.get<std::vector<double>>()));
  if (static_cast<int>(m.phi.size()) != m.p) throw DataError("phi list length differs from p");
  m.sigma = unflat(j.at("sigma").get<std::vector<double>>());
  return m;
}

}  // namespace dysp
