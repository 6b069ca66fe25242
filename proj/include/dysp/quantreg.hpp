#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/regression.hpp"

namespace dysp {

/// Check loss sum_i rho_tau(y_i - x_i' beta).
inline double check_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                         double tau) {
  const Eigen::VectorXd r = y - X * beta;
  double s = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += r(i) >= 0.0 ? tau * r(i) : (tau - 1.0) * r(i);
  return s;
}

namespace detail {

/// Bounded-variable simplex on the dual of the check-loss LP:
///   max y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1.
/// The optimal basis picks k rows h with X_h beta = y_h, which is the primal
/// minimizer. Phase 1 drives k artificial columns out of the basis.
class QuantileSimplex {
 public:
  QuantileSimplex(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau)
      : X_(X), y_(y), n_(X.rows()), k_(X.cols()) {
    const Eigen::VectorXd b = (1.0 - tau) * X.transpose() * Eigen::VectorXd::Ones(n_);
    const Eigen::Index m = n_ + k_;
    tab_.resize(k_, m);
    tab_.leftCols(n_) = X.transpose();
    tab_.rightCols(k_).setZero();
    xb_.resize(k_);
    basis_.resize(static_cast<std::size_t>(k_));
    upper_.assign(static_cast<std::size_t>(m), false);
    in_basis_.assign(static_cast<std::size_t>(m), false);
    // all structural variables start at their lower bound 0; artificials absorb b
    for (Eigen::Index r = 0; r < k_; ++r) {
      const double sign = b(r) < 0.0 ? -1.0 : 1.0;
      tab_.row(r) *= sign;
      tab_(r, n_ + r) = 1.0;
      xb_(r) = std::abs(b(r));
      basis_[static_cast<std::size_t>(r)] = n_ + r;
      in_basis_[static_cast<std::size_t>(n_ + r)] = true;
    }
    scale_ = std::max(1.0, y.cwiseAbs().maxCoeff());
  }

  Eigen::VectorXd solve() {
    Eigen::VectorXd c1 = Eigen::VectorXd::Zero(n_ + k_);
    c1.tail(k_).setOnes();
    run(c1, /*allow_artificial=*/true);
    if (phase1_objective() > 1e-9 * std::max(1.0, static_cast<double>(n_)))
      throw NumericalError("quantile regression: infeasible dual (degenerate design)");
    expel_artificials();
    Eigen::VectorXd c2 = Eigen::VectorXd::Zero(n_ + k_);
    c2.head(n_) = -y_;
    run(c2, /*allow_artificial=*/false);
    Eigen::MatrixXd Xh(k_, k_);
    Eigen::VectorXd yh(k_);
    for (Eigen::Index r = 0; r < k_; ++r) {
      const Eigen::Index j = basis_[static_cast<std::size_t>(r)];
      Xh.row(r) = X_.row(j);
      yh(r) = y_(j);
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(Xh);
    if (!lu.isInvertible()) throw NumericalError("quantile regression: singular optimal basis");
    return lu.solve(yh);
  }

 private:
  [[nodiscard]] double phase1_objective() const {
    double s = 0;
    for (Eigen::Index r = 0; r < k_; ++r)
      if (basis_[static_cast<std::size_t>(r)] >= n_) s += xb_(r);
    return s;
  }

  [[nodiscard]] double ub(Eigen::Index j) const {
    return j < n_ ? 1.0 : std::numeric_limits<double>::infinity();
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    const double piv = tab_(row, col);
    tab_.row(row) /= piv;
    for (Eigen::Index r = 0; r < k_; ++r)
      if (r != row && tab_(r, col) != 0.0) tab_.row(r) -= tab_(r, col) * tab_.row(row);
    tab_.col(col).setZero();
    tab_(row, col) = 1.0;
    in_basis_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(row)])] = false;
    basis_[static_cast<std::size_t>(row)] = col;
    in_basis_[static_cast<std::size_t>(col)] = true;
    upper_[static_cast<std::size_t>(col)] = false;
  }

  void run(const Eigen::VectorXd& cost, bool allow_artificial) {
    constexpr double eps = 1e-11;
    const Eigen::Index limit = allow_artificial ? n_ + k_ : n_;
    int stalled = 0;
    for (long iter = 0; iter < 100000; ++iter) {
      Eigen::VectorXd cb(k_);
      for (Eigen::Index r = 0; r < k_; ++r) cb(r) = cost(basis_[static_cast<std::size_t>(r)]);
      const Eigen::RowVectorXd reduced = cost.transpose() - cb.transpose() * tab_;
      // entering column: Dantzig, or Bland after a run of degenerate steps
      Eigen::Index enter = -1;
      double best = 0.0;
      for (Eigen::Index j = 0; j < limit; ++j) {
        if (in_basis_[static_cast<std::size_t>(j)]) continue;
        const double gain = upper_[static_cast<std::size_t>(j)] ? reduced(j) : -reduced(j);
        if (gain > eps * scale_ && (enter < 0 || (stalled < 50 && gain > best))) {
          enter = j;
          best = gain;
          if (stalled >= 50) break;
        }
      }
      if (enter < 0) return;
      const double dir = upper_[static_cast<std::size_t>(enter)] ? -1.0 : 1.0;
      double theta = ub(enter);
      Eigen::Index leave = -1;
      bool leave_to_upper = false;
      for (Eigen::Index r = 0; r < k_; ++r) {
        const double delta = -dir * tab_(r, enter);  // rate of change of basic r
        const Eigen::Index bj = basis_[static_cast<std::size_t>(r)];
        double t = 0.0;
        bool to_upper = false;
        if (delta < -1e-12) {
          t = xb_(r) / -delta;
        } else if (delta > 1e-12 && std::isfinite(ub(bj))) {
          t = (ub(bj) - xb_(r)) / delta;
          to_upper = true;
        } else {
          continue;
        }
        const bool tie = std::abs(t - theta) <= 1e-14 && leave >= 0 && bj < basis_[static_cast<std::size_t>(leave)];
        if (t < theta - 1e-14 || tie) {
          theta = t;
          leave = r;
          leave_to_upper = to_upper;
        }
      }
      if (!std::isfinite(theta)) throw NumericalError("quantile regression: unbounded LP");
      stalled = theta <= 1e-14 ? stalled + 1 : 0;
      xb_ -= dir * theta * tab_.col(enter);
      if (leave < 0) {
        upper_[static_cast<std::size_t>(enter)] = !upper_[static_cast<std::size_t>(enter)];
        continue;
      }
      const Eigen::Index old = basis_[static_cast<std::size_t>(leave)];
      const double entering_value = upper_[static_cast<std::size_t>(enter)] ? ub(enter) - theta : theta;
      pivot(leave, enter);
      xb_(leave) = entering_value;
      upper_[static_cast<std::size_t>(old)] = leave_to_upper;
      for (Eigen::Index r = 0; r < k_; ++r) xb_(r) = std::clamp(xb_(r), 0.0, ub(basis_[static_cast<std::size_t>(r)]));
    }
    throw NumericalError("quantile regression: simplex iteration limit reached");
  }

  void expel_artificials() {
    for (Eigen::Index r = 0; r < k_; ++r) {
      if (basis_[static_cast<std::size_t>(r)] < n_) continue;
      Eigen::Index col = -1;
      double best = 1e-9;
      for (Eigen::Index j = 0; j < n_; ++j)
        if (!in_basis_[static_cast<std::size_t>(j)] && std::abs(tab_(r, j)) > best) {
          best = std::abs(tab_(r, j));
          col = j;
        }
      if (col < 0) throw NumericalError("quantile regression: design is rank deficient");
      const double value = upper_[static_cast<std::size_t>(col)] ? 1.0 : 0.0;
      pivot(r, col);
      xb_(r) = value;
    }
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  Eigen::Index n_, k_;
  Eigen::MatrixXd tab_;
  Eigen::VectorXd xb_;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> upper_;
  std::vector<bool> in_basis_;
  double scale_ = 1.0;
};

}  // namespace detail

/// Minimizes the check loss exactly (vertex solution of the LP).
inline Eigen::VectorXd quantile_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("quantile tau must lie in (0, 1)");
  if (X.rows() < X.cols()) throw NumericalError("quantile regression needs at least as many rows as regressors");
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < X.cols()) throw NumericalError("quantile regression design is rank deficient");
  return detail::QuantileSimplex(X, y, tau).solve();
}

struct QuantileOptions {
  int bootstrap = 1000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// Quantile regression with pairs-bootstrap standard errors (SD over B
/// resamples); p-values from the normal approximation.
inline RegressionFit quantile_fit(const RegressionDesign& d, double tau, const QuantileOptions& o = {}) {
  if (o.bootstrap < 1) throw ConfigError("bootstrap count must be at least 1");
  RegressionFit r;
  r.tau = tau;
  r.method = "Quantile(tau=" + detail::fmt_num(tau) + ",B=" + std::to_string(o.bootstrap) + ")";
  r.labels = d.labels;
  r.n = d.n();
  r.coefficients = quantile_coefficients(d.X, d.y, tau);
  const Eigen::Index n = d.n(), k = d.k();
  std::vector<Eigen::VectorXd> draws(static_cast<std::size_t>(o.bootstrap));
  detail::parallel_for(draws.size(), o.workers, [&](std::size_t b) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      auto rng = detail::stream_rng(o.seed, (static_cast<std::uint64_t>(b) << 8) | attempt);
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      Eigen::MatrixXd Xb(n, k);
      Eigen::VectorXd yb(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index s = pick(rng);
        Xb.row(i) = d.X.row(s);
        yb(i) = d.y(s);
      }
      try {
        draws[b] = quantile_coefficients(Xb, yb, tau);
        return;
      } catch (const NumericalError&) {
        if (attempt >= 255) throw;
      }
    }
  });
  r.std_errors.resize(k);
  r.p_values.resize(k);
  const boost::math::normal z;
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col;
    for (const auto& v : draws) col.push_back(v(j));
    r.std_errors(j) = detail::stddev(col);
    r.p_values(j) = r.std_errors(j) > 0.0
                        ? 2.0 * boost::math::cdf(boost::math::complement(z, std::abs(r.coefficients(j) / r.std_errors(j))))
                        : 1.0;
  }
  return r;
}

/// (tau, coefficient, lower, upper) rows for one term, with a 95% normal band,
/// plus the implied effect of a 1% and a 100% increase in the log regressor.
inline void write_quantile_profile(std::ostream& out, const std::vector<RegressionFit>& fits, Eigen::Index term,
                                   char delim = ',') {
  out << "tau" << delim << "coefficient" << delim << "lower" << delim << "upper" << delim << "effect_1pct"
      << delim << "effect_100pct\n";
  for (const auto& f : fits) {
    const double b = f.coefficients(term), se = f.std_errors(term);
    out << detail::fmt_num(f.tau.value_or(0.0)) << delim << detail::fmt_num(b) << delim
        << detail::fmt_num(b - 1.959963984540054 * se) << delim << detail::fmt_num(b + 1.959963984540054 * se)
        << delim << detail::fmt_num(b * std::log(1.01)) << delim << detail::fmt_num(b * std::log(2.0)) << '\n';
  }
}

}  // namespace dysp
