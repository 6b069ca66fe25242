#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "dysp/quantreg.hpp"
#include "oracles.hpp"
#include "sim.hpp"

using namespace dysp;

namespace {

RegressionDesign design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  RegressionDesign d;
  d.X = X;
  d.y = y;
  for (Eigen::Index j = 0; j < X.cols(); ++j) d.labels.push_back("x" + std::to_string(j));
  return d;
}

Eigen::MatrixXd with_intercept(std::mt19937_64& rng, int n, int k) {
  Eigen::MatrixXd X = sim::gaussian(rng, n, k);
  X.col(0).setOnes();
  return X;
}

}  // namespace

TEST(QuantReg, ObjectiveMatchesVertexEnumeration) {
  std::mt19937_64 rng(91);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd X = with_intercept(rng, 10, 3);
    const Eigen::VectorXd y = sim::gaussian(rng, 10, 1);
    for (double tau : {0.25, 0.5, 0.9}) {
      const double oracle = sim::quantile_loss_by_enumeration(X, y, tau);
      const double got = check_loss(X, y, quantile_coefficients(X, y, tau), tau);
      EXPECT_NEAR(got, oracle, 1e-8) << "rep " << rep << " tau " << tau;
    }
  }
}

TEST(QuantReg, ObjectiveMatchesOnTiedAndDegenerateData) {
  std::mt19937_64 rng(92);
  std::uniform_int_distribution<int> small(0, 3);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd X(12, 2);
    Eigen::VectorXd y(12);
    for (int i = 0; i < 12; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = small(rng);
      y(i) = small(rng);
    }
    if ((X.col(1).array() == X(0, 1)).all()) X(0, 1) += 1.0;
    const double oracle = sim::quantile_loss_by_enumeration(X, y, 0.5);
    EXPECT_NEAR(check_loss(X, y, quantile_coefficients(X, y, 0.5), 0.5), oracle, 1e-8);
  }
}

TEST(QuantReg, InterceptOnlyMedian) {
  std::mt19937_64 rng(93);
  for (int n : {1, 5, 21, 101}) {
    const Eigen::VectorXd y = sim::gaussian(rng, n, 1);
    std::vector<double> s(y.data(), y.data() + n);
    std::sort(s.begin(), s.end());
    const auto b = quantile_coefficients(Eigen::MatrixXd::Ones(n, 1), y, 0.5);
    EXPECT_EQ(b(0), s[static_cast<std::size_t>(n / 2)]);
  }
  Eigen::VectorXd y(7);
  y << 4, 1, 9, 7, 3, 3, 8;
  EXPECT_EQ(quantile_coefficients(Eigen::MatrixXd::Ones(7, 1), y, 0.5)(0), 4.0);
}

TEST(QuantReg, Equivariance) {
  std::mt19937_64 rng(94);
  const Eigen::MatrixXd X = with_intercept(rng, 40, 3);
  const Eigen::VectorXd y = sim::gaussian(rng, 40, 1);
  const Eigen::Vector3d gamma(1.0, -2.0, 0.5);
  const auto b = quantile_coefficients(X, y, 0.75);
  EXPECT_LE((quantile_coefficients(X, 3.0 * y, 0.75) - 3.0 * b).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((quantile_coefficients(X, y + X * gamma, 0.75) - (b + gamma)).cwiseAbs().maxCoeff(), 1e-9);
  // reflecting y swaps tau and 1 - tau
  const double lo = check_loss(X, -y, -b, 0.25);
  EXPECT_NEAR(check_loss(X, -y, quantile_coefficients(X, -y, 0.25), 0.25), lo, 1e-9);
}

TEST(QuantReg, RecoversLocationShiftModel) {
  std::mt19937_64 rng(95);
  const Eigen::MatrixXd X = with_intercept(rng, 2000, 2);
  const Eigen::VectorXd y = X * Eigen::Vector2d(1.0, 2.0) + sim::gaussian(rng, 2000, 1);
  const auto b = quantile_coefficients(X, y, 0.5);
  EXPECT_NEAR(b(0), 1.0, 0.1);
  EXPECT_NEAR(b(1), 2.0, 0.1);
}

TEST(QuantReg, Errors) {
  EXPECT_THROW(quantile_coefficients(Eigen::MatrixXd::Ones(5, 1), Eigen::VectorXd::Ones(5), 0.0), ConfigError);
  EXPECT_THROW(quantile_coefficients(Eigen::MatrixXd::Ones(5, 1), Eigen::VectorXd::Ones(5), 1.0), ConfigError);
  EXPECT_THROW(quantile_coefficients(Eigen::MatrixXd::Ones(5, 2), Eigen::VectorXd::Ones(5), 0.5), NumericalError);
  EXPECT_THROW(quantile_coefficients(Eigen::MatrixXd::Ones(1, 2), Eigen::VectorXd::Ones(1), 0.5), NumericalError);
}

TEST(QuantReg, BootstrapIsSeededAndWorkerIndependent) {
  std::mt19937_64 rng(96);
  const Eigen::MatrixXd X = with_intercept(rng, 60, 2);
  const auto d = design(X, X.col(1) + sim::gaussian(rng, 60, 1));
  QuantileOptions a{200, 7, 1}, b{200, 7, 3}, c{200, 8, 1};
  const auto fa = quantile_fit(d, 0.5, a), fb = quantile_fit(d, 0.5, b), fc = quantile_fit(d, 0.5, c);
  EXPECT_EQ(fa.std_errors, fb.std_errors);
  EXPECT_NE(fa.std_errors, fc.std_errors);
  EXPECT_GT(fa.std_errors(1), 0.05);
  EXPECT_LT(fa.std_errors(1), 0.5);
  EXPECT_EQ(*fa.tau, 0.5);
  EXPECT_EQ(fa.method, "Quantile(tau=0.5,B=200)");
  EXPECT_THROW(quantile_fit(d, 0.5, {0, 1, 1}), ConfigError);
}

TEST(QuantReg, ProfileWriter) {
  RegressionFit f;
  f.tau = 0.25;
  f.coefficients = Eigen::Vector2d(0.0, 2.0);
  f.std_errors = Eigen::Vector2d(0.0, 0.0);
  std::ostringstream os;
  write_quantile_profile(os, {f}, 1);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "tau,coefficient,lower,upper,effect_1pct,effect_100pct");
  EXPECT_EQ(row.rfind("0.25,2,2,2,", 0), 0u);
}
