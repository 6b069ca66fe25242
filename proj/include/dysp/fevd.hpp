#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dysp/error.hpp"
#include "dysp/var.hpp"

namespace dysp {

enum class FevdMethod {
  cholesky,            // orthogonalized shocks via the lower Cholesky factor of Sigma
  generalized,         // ordering-invariant generalized shocks
  generalized_literal  // audit mode: the generalized formula with the textbook index placement
};

inline std::string to_string(FevdMethod m) {
  switch (m) {
    case FevdMethod::cholesky: return "cholesky";
    case FevdMethod::generalized: return "generalized";
    case FevdMethod::generalized_literal: return "generalized-literal";
  }
  return "?";
}

inline FevdMethod parse_fevd_method(const std::string& s) {
  if (s == "cholesky" || s == "orthogonal") return FevdMethod::cholesky;
  if (s == "generalized" || s == "gfevd") return FevdMethod::generalized;
  if (s == "generalized-literal" || s == "literal") return FevdMethod::generalized_literal;
  throw ConfigError("unknown FEVD method '" + s + "'");
}

/// H-step variance shares. d(i, j) is the fraction of target j's forecast-error
/// variance attributed to shocks in source i (row = source, column = target).
struct FevdMatrix {
  int horizon = 1;
  FevdMethod method = FevdMethod::generalized;
  Eigen::MatrixXd d;
  bool normalized = false;
};

/// Forecast-error variance decomposition at horizon H.
///
/// With theta = sum_h (e_j' A_h S e_i)^2 over h < H and the target's H-step
/// error variance v_j = sum_h e_j' A_h Sigma A_h' e_j:
///   cholesky:    S = P (Sigma = P P'), share = theta / v_j; columns sum to 1.
///   generalized: S = Sigma, share = theta / (Sigma_ii v_j); columns need not sum to 1.
/// The literal mode evaluates the same summands with the row index as the
/// decomposed variable and the scale taken as the standard deviation of that
/// variable's own error, exactly as the formula is typeset.
inline FevdMatrix fevd(const VarModel& model, int horizon, FevdMethod method) {
  if (horizon < 1) throw ConfigError("FEVD horizon must be at least 1");
  const Eigen::Index n = model.dim();
  const auto ma = ma_coefficients(model, horizon);
  const Eigen::MatrixXd& sigma = model.sigma;

  Eigen::MatrixXd impact;
  if (method == FevdMethod::cholesky) {
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("cholesky FEVD requires a positive definite residual covariance");
    impact = llt.matrixL();
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(sigma(i, i) > 0.0))
        throw NumericalError("generalized FEVD requires positive residual variances");
    impact = sigma;
  }

  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(n, n);  // num(a, b) = sum_h ((A_h S)(a, b))^2
  Eigen::VectorXd mse = Eigen::VectorXd::Zero(n);
  for (const auto& a : ma.A) {
    num += (a * impact).array().square().matrix();
    mse += (a * sigma * a.transpose()).diagonal();
  }

  FevdMatrix out;
  out.horizon = horizon;
  out.method = method;
  out.d.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      switch (method) {
        case FevdMethod::cholesky: out.d(i, j) = num(j, i) / mse(j); break;
        case FevdMethod::generalized: out.d(i, j) = num(j, i) / (sigma(i, i) * mse(j)); break;
        case FevdMethod::generalized_literal:
          out.d(i, j) = num(i, j) / (std::sqrt(sigma(i, i)) * mse(i));
          break;
      }
    }
  }
  return out;
}

/// Rescales each target's incoming shares (each column) to sum to one.
inline FevdMatrix normalize_rows_to_target(const FevdMatrix& in) {
  FevdMatrix out = in;
  for (Eigen::Index j = 0; j < out.d.cols(); ++j) {
    const double s = out.d.col(j).sum();
    if (!(s > 0.0)) throw NumericalError("target " + std::to_string(j) + " has zero incoming share");
    out.d.col(j) /= s;
  }
  out.normalized = true;
  return out;
}

}  // namespace dysp
