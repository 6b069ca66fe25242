#pragma once

// Seeded simulators shared by the unit and acceptance suites.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dysp/panel.hpp"

namespace dysp::sim {

inline std::vector<std::string> labels(int n) {
  std::vector<std::string> l;
  for (int i = 0; i < n; ++i) l.push_back("L" + std::to_string(i));
  return l;
}

inline std::vector<int> years_from(int first, int count) {
  std::vector<int> y;
  for (int t = 0; t < count; ++t) y.push_back(first + t);
  return y;
}

/// Standard normal draws.
inline Eigen::MatrixXd gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd e(rows, cols);
  for (int t = 0; t < rows; ++t)
    for (int c = 0; c < cols; ++c) e(t, c) = z(rng);
  return e;
}

/// y_t = phi(t) y_{t-1} + chol e_t with a burn-in; phi may switch at `switch_row`.
inline Eigen::MatrixXd simulate_var1(std::mt19937_64& rng, int rows, const Eigen::MatrixXd& phi_before,
                                     const Eigen::MatrixXd& phi_after, int switch_row,
                                     const Eigen::MatrixXd& chol, int burn = 200) {
  const auto n = phi_before.rows();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd out(rows, n);
  std::normal_distribution<double> z;
  for (int t = -burn; t < rows; ++t) {
    Eigen::VectorXd e(n);
    for (Eigen::Index c = 0; c < n; ++c) e(c) = z(rng);
    const Eigen::MatrixXd& phi = t < switch_row ? phi_before : phi_after;
    y = phi * y + chol * e;
    if (t >= 0) out.row(t) = y.transpose();
  }
  return out;
}

inline Eigen::MatrixXd simulate_var1(std::mt19937_64& rng, int rows, const Eigen::MatrixXd& phi,
                                     const Eigen::MatrixXd& chol) {
  return simulate_var1(rng, rows, phi, phi, rows, chol);
}

inline PricePanel panel_of(const Eigen::MatrixXd& values, int first_year = 1600) {
  return {years_from(first_year, static_cast<int>(values.rows())), labels(static_cast<int>(values.cols())),
          values};
}

inline std::vector<double> random_walk(std::mt19937_64& rng, int length) {
  std::normal_distribution<double> z;
  std::vector<double> v(static_cast<std::size_t>(length));
  double x = 0;
  for (auto& e : v) e = (x += z(rng));
  return v;
}

inline std::vector<double> white_noise(std::mt19937_64& rng, int length) {
  std::normal_distribution<double> z;
  std::vector<double> v(static_cast<std::size_t>(length));
  for (auto& e : v) e = z(rng);
  return v;
}

}  // namespace dysp::sim
