#include <gtest/gtest.h>

#include <functional>
#include <limits>
#include <random>
#include <sstream>

#include "dysp/panel.hpp"
#include "sim.hpp"

using namespace dysp;

namespace {

PanelLoad load(const std::string& text, GapPolicy gaps = GapPolicy::strict) {
  std::istringstream in(text);
  PanelSchema s;
  s.gaps = gaps;
  return load_panel(in, s);
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(LoadPanel, CompleteThreeYearTwoCity) {
  const auto r = load("year,Paris,London\n1700,1.0,2.0\n1701,1.5,2.5\n1702,2.0,3.0\n");
  EXPECT_EQ(r.panel.rows(), 3);
  EXPECT_EQ(r.panel.cols(), 2);
  EXPECT_EQ(r.panel.locations()[1], "London");
  EXPECT_DOUBLE_EQ(r.panel.values()(2, 1), 3.0);
  EXPECT_TRUE(r.gaps.empty());
  EXPECT_TRUE(r.panel.lineage().empty());
}

TEST(LoadPanel, SortsRowsByYear) {
  const auto r = load("Paris,year\n5,1702\n3,1700\n4,1701\n");
  EXPECT_EQ(r.panel.years(), (std::vector<int>{1700, 1701, 1702}));
  EXPECT_DOUBLE_EQ(r.panel.values()(0, 0), 3.0);
}

// Six rows with 1701 and 1705 missing:
// blocks {1698,1699,1700}, {1702,1703,1704}, {1706} -> longest earliest is 1698..1700.
TEST(LoadPanel, GapStrictErrorsLenientTruncates) {
  const std::string text = "year,A\n1698,1\n1699,2\n1700,3\n1702,4\n1703,5\n1704,6\n1706,7\n";
  EXPECT_THROW(load(text), DataError);
  const auto r = load(text, GapPolicy::lenient);
  EXPECT_EQ(r.panel.years(), (std::vector<int>{1698, 1699, 1700}));
  ASSERT_EQ(r.gaps.size(), 2u);
  EXPECT_EQ(r.gaps[0].after, 1700);
  EXPECT_EQ(r.gaps[0].before, 1702);
}

TEST(LoadPanel, LenientPrefersLongerLaterBlock) {
  const auto r = load("year,A\n1700,1\n1702,2\n1703,3\n1704,4\n1705,5\n1706,6\n", GapPolicy::lenient);
  EXPECT_EQ(r.panel.years(), (std::vector<int>{1702, 1703, 1704, 1705, 1706}));
}

TEST(LoadPanel, NonNumericCellNamesRowAndColumn) {
  const auto msg = message_of([] { load("year,A,B\n1700,1,2\n1701,n/a,3\n"); });
  EXPECT_NE(msg.find("row 3"), std::string::npos);
  EXPECT_NE(msg.find("'A'"), std::string::npos);
  EXPECT_NE(msg.find("n/a"), std::string::npos);
}

TEST(LoadPanel, MissingYearColumnAndDuplicates) {
  EXPECT_THROW(load("Year,A\n1700,1\n"), DataError);
  EXPECT_THROW(load("year,A\n1700,1\n1700,2\n"), DataError);
  std::istringstream in("annee;A\n1700;1\n1701;2\n");
  PanelSchema s;
  s.delimiter = ';';
  s.year_column = "annee";
  EXPECT_EQ(load_panel(in, s).panel.rows(), 2);
}

TEST(LoadPanel, WriteRoundTrip) {
  const auto r = load("year,\"Den Haag\",B\n1700,1.25,2\n1701,0.1,3e-7\n");
  std::ostringstream out;
  write_panel(out, r.panel);
  const auto back = load(out.str());
  EXPECT_EQ(back.panel.locations(), r.panel.locations());
  EXPECT_EQ(back.panel.values(), r.panel.values());
}

TEST(Winsorize, ConstantColumnUnchanged) {
  const PricePanel p({1, 2, 3, 4}, {"A"}, Eigen::MatrixXd::Constant(4, 1, 7.0));
  EXPECT_EQ(winsorize(p, 0.25).values(), p.values());
}

TEST(Winsorize, OneToHundredAtOnePercent) {
  Eigen::MatrixXd v(100, 1);
  for (int i = 0; i < 100; ++i) v(i, 0) = i + 1;
  const auto w = winsorize(sim::panel_of(v), 0.01);
  // floor(100 * 0.01) = 1 value clipped per side, to the 2nd and 99th order statistics
  EXPECT_EQ(w.values()(0, 0), 2.0);
  EXPECT_EQ(w.values()(99, 0), 99.0);
  for (int i = 1; i < 99; ++i) EXPECT_EQ(w.values()(i, 0), i + 1);
  ASSERT_EQ(w.lineage().size(), 1u);
  EXPECT_EQ(w.lineage()[0].kind, TransformKind::winsorized);
}

TEST(Winsorize, RejectsFractionOutOfRange) {
  const auto p = sim::panel_of(Eigen::MatrixXd::Ones(5, 1));
  EXPECT_THROW(winsorize(p, 0.6), ConfigError);
  EXPECT_THROW(winsorize(p, 0.0), ConfigError);
}

TEST(Winsorize, WarnsOnShortColumns) {
  std::vector<std::string> warnings;
  winsorize(sim::panel_of(Eigen::MatrixXd::Random(20, 2)), 0.01, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(WinsorizeProperty, IdempotentAndMonotone) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int rows = 10 + static_cast<int>(rng() % 300);
    Eigen::MatrixXd v = sim::gaussian(rng, rows, 3);
    v.col(2) = v.col(2).array().exp() * 100.0;  // skewed
    if (rep % 5 == 0) v.col(1).head(rows / 2).setConstant(0.5);  // ties
    const double p = 0.005 + 0.4 * (static_cast<double>(rng() % 1000) / 1000.0);
    const auto once = winsorize(sim::panel_of(v), p);
    const auto twice = winsorize(once, p);
    ASSERT_EQ(once.values(), twice.values()) << "p=" << p << " rows=" << rows;
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < rows; ++a)
        for (int b = 0; b < rows; b += 7)
          if (v(a, c) < v(b, c)) {
            ASSERT_LE(once.values()(a, c), once.values()(b, c));
          }
  }
}

TEST(FirstDifference, Arithmetic) {
  Eigen::MatrixXd v(3, 2);
  v << 5, 1, 5, 3, 5, 6;
  const auto d = first_difference(PricePanel({1700, 1701, 1702}, {"A", "B"}, v));
  EXPECT_EQ(d.years(), (std::vector<int>{1701, 1702}));
  EXPECT_EQ(d.values()(0, 0), 0.0);
  EXPECT_EQ(d.values()(1, 0), 0.0);
  EXPECT_EQ(d.values()(0, 1), 2.0);
  EXPECT_EQ(d.values()(1, 1), 3.0);
  EXPECT_EQ(d.kind(), TransformKind::first_differenced);
}

TEST(FirstDifference, SingleRowErrors) {
  EXPECT_THROW(first_difference(sim::panel_of(Eigen::MatrixXd::Ones(1, 2))), DataError);
}

TEST(FirstDifferenceProperty, InvertsCumulativeSum) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd inc = sim::gaussian(rng, 200, 4);
  Eigen::MatrixXd levels(200, 4);
  levels.row(0) = inc.row(0);
  for (int t = 1; t < 200; ++t) levels.row(t) = levels.row(t - 1) + inc.row(t);
  const auto d = first_difference(sim::panel_of(levels));
  const double tol = 1e-12 * levels.cwiseAbs().maxCoeff();
  EXPECT_LE((d.values() - inc.bottomRows(199)).cwiseAbs().maxCoeff(), tol);
}

TEST(Correlation, SelfAndAffine) {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd v = sim::gaussian(rng, 40, 2);
  v.col(1) = 2.0 * v.col(0).array() + 3.0;
  const auto r = pearson_correlation_matrix(sim::panel_of(v));
  EXPECT_DOUBLE_EQ(r(0, 0), 1.0);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-14);
}

TEST(Correlation, FixedFivePointColumns) {
  Eigen::MatrixXd v(5, 2);
  v << 1, 2, 2, 1, 3, 4, 4, 3, 5, 5;
  // cov = 8/4 = 2, var_x = var_y = 10/4 -> r = 2 / 2.5 = 0.8
  EXPECT_NEAR(pearson_correlation_matrix(sim::panel_of(v))(0, 1), 0.8, 1e-15);
}

TEST(Correlation, ZeroVarianceColumnNamed) {
  Eigen::MatrixXd v(4, 2);
  v << 1, 3, 2, 3, 3, 3, 4, 3;
  const PricePanel p({1, 2, 3, 4}, {"A", "Flat"}, v);
  try {
    pearson_correlation_matrix(p);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("Flat"), std::string::npos);
  }
}

TEST(CorrelationProperty, SymmetricPsdBounded) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const auto r = pearson_correlation_matrix(sim::panel_of(sim::gaussian(rng, 8, 6)));
    EXPECT_EQ(r, r.transpose());
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1.0);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(PricePanel, RejectsBadShapes) {
  EXPECT_THROW(PricePanel({1700, 1702}, {"A"}, Eigen::MatrixXd::Ones(2, 1)), DataError);
  EXPECT_THROW(PricePanel({1700}, {"A", "B"}, Eigen::MatrixXd::Ones(1, 1)), DataError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(1, 1);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(PricePanel({1700}, {"A"}, bad), DataError);
}
