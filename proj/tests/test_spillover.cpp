#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "dysp/spillover.hpp"
#include "sim.hpp"

using namespace dysp;

namespace {

FevdMatrix shares(const Eigen::MatrixXd& d, FevdMethod method = FevdMethod::generalized) {
  return {10, method, d, true};
}

Eigen::MatrixXd random_column_stochastic(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = u(rng);
  for (int j = 0; j < n; ++j) d.col(j) /= d.col(j).sum();
  return d;
}

Eigen::MatrixXd coupled_phi(int n, double cross, double own = 0.3) {
  Eigen::MatrixXd phi = Eigen::MatrixXd::Constant(n, n, cross);
  phi.diagonal().setConstant(own);
  return phi;
}

}  // namespace

TEST(SpilloverTable, IdentityHasNoSpillover) {
  const auto t = spillover_table(shares(Eigen::MatrixXd::Identity(4, 4)));
  EXPECT_EQ(t.total, 0.0);
  EXPECT_EQ(t.to_others.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(t.net.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SpilloverTable, UniformFourByFour) {
  const auto t = spillover_table(shares(Eigen::MatrixXd::Constant(4, 4, 0.25)));
  EXPECT_EQ(t.total, 75.0);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(t.to_others(i), 75.0);
    EXPECT_EQ(t.from_others(i), 75.0);
    EXPECT_EQ(t.net(i), 0.0);
  }
}

TEST(SpilloverTable, WorkedTwoByTwo) {
  Eigen::MatrixXd d(2, 2);
  d << 1.25 / 1.29, 0.0, 0.04 / 1.29, 1.0;
  const auto t = spillover_table(shares(d, FevdMethod::cholesky), {"A", "B"});
  EXPECT_NEAR(t.to_others(1), 400.0 / 129.0, 1e-12);
  EXPECT_NEAR(t.from_others(0), 400.0 / 129.0, 1e-12);
  EXPECT_EQ(t.to_others(0), 0.0);
  EXPECT_NEAR(t.net(1), 400.0 / 129.0, 1e-12);
  EXPECT_NEAR(t.net(0), -400.0 / 129.0, 1e-12);
  EXPECT_NEAR(t.total, 200.0 / 129.0, 1e-12);
  EXPECT_NEAR(net_pairwise(t, 1, 0), 400.0 / 129.0, 1e-12);
  EXPECT_NEAR(net_pairwise(t, 0, 1), -400.0 / 129.0, 1e-12);
  EXPECT_THROW(net_pairwise(t, 1, 1), ConfigError);
  EXPECT_THROW(net_pairwise(t, 0, 2), ConfigError);
}

TEST(SpilloverTable, RejectsUnnormalizedGeneralized) {
  FevdMatrix d{10, FevdMethod::generalized, Eigen::MatrixXd::Identity(2, 2), false};
  EXPECT_THROW(spillover_table(d), ConfigError);
  EXPECT_THROW(spillover_table(shares(Eigen::MatrixXd::Identity(2, 2)), {"one"}), DataError);
}

TEST(SpilloverProperty, NetSumsToZeroAndTotalBounds) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + rep % 8;
    const auto t = spillover_table(shares(random_column_stochastic(rng, n)));
    EXPECT_LE(std::abs(t.net.sum()), 1e-8);
    EXPECT_GE(t.total, 0.0);
    EXPECT_LT(t.total, 100.0);
    EXPECT_NEAR(t.total, t.to_others.mean(), 1e-9);
    EXPECT_NEAR(t.total, t.from_others.mean(), 1e-9);
  }
}

TEST(SpilloverProperty, GeneralizedOrderingInvarianceCholeskyNot) {
  std::mt19937_64 rng(31);
  Eigen::MatrixXd chol(5, 5);
  chol.setIdentity();
  chol.triangularView<Eigen::StrictlyLower>().setConstant(0.5);
  const Eigen::MatrixXd data = sim::simulate_var1(rng, 150, coupled_phi(5, 0.1), chol);
  const auto panel = sim::panel_of(data);
  SpilloverOptions g;
  SpilloverOptions c;
  c.method = FevdMethod::cholesky;
  const double base_g = spillover_from_panel(panel, g).total;
  const double base_c = spillover_from_panel(panel, c).total;
  std::vector<Eigen::Index> order(5);
  std::iota(order.begin(), order.end(), 0);
  double max_c_diff = 0.0;
  for (int k = 0; k < 20; ++k) {
    std::shuffle(order.begin(), order.end(), rng);
    const auto permuted = panel.permute_columns(order);
    EXPECT_NEAR(spillover_from_panel(permuted, g).total, base_g, 1e-8);
    max_c_diff = std::max(max_c_diff, std::abs(spillover_from_panel(permuted, c).total - base_c));
  }
  EXPECT_GT(max_c_diff, 1e-4);
}

TEST(SpilloverProperty, LocationPermutationMovesRowsAndColumns) {
  std::mt19937_64 rng(32);
  const Eigen::MatrixXd data = sim::simulate_var1(rng, 120, coupled_phi(3, 0.2), Eigen::MatrixXd::Identity(3, 3));
  const auto panel = sim::panel_of(data);
  const std::vector<Eigen::Index> order{2, 0, 1};
  const auto a = spillover_from_panel(panel, {});
  const auto b = spillover_from_panel(panel.permute_columns(order), {});
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(b.labels[i], a.labels[order[i]]);
    EXPECT_NEAR(b.net(i), a.net(order[i]), 1e-9);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(b.fevd.d(i, j), a.fevd.d(order[i], order[j]), 1e-9);
  }
}

TEST(Rolling, WindowFeasibility) {
  SpilloverOptions o;
  EXPECT_NO_THROW(check_window(30, 14, 100, o));
  try {
    check_window(29, 14, 100, o);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("rank deficiency"), std::string::npos);
  }
  EXPECT_THROW(check_window(50, 3, 40, o), ConfigError);
  o.p = 2;
  EXPECT_THROW(check_window(35, 14, 100, o), ConfigError);
  EXPECT_NO_THROW(check_window(45, 14, 100, o));
}

TEST(Rolling, EndYearsAndAveraging) {
  std::mt19937_64 rng(41);
  const auto panel = sim::panel_of(sim::gaussian(rng, 60, 3), 1700);
  SpilloverOptions o;
  const auto r = rolling_spillover(panel, 30, o);
  ASSERT_EQ(r.end_years.size(), 31u);
  EXPECT_EQ(r.end_years.front(), 1729);
  EXPECT_EQ(r.end_years.back(), 1759);
  EXPECT_NEAR(r.tables.front()->total, spillover_from_panel(panel.slice_rows(0, 30), o).total, 1e-12);

  std::vector<RollingSpillover> runs;
  const auto avg = average_over_windows(panel, {30, 32}, o, &runs);
  ASSERT_EQ(runs.size(), 2u);
  ASSERT_EQ(avg.years.front(), 1729);
  EXPECT_EQ(avg.n_windows.front(), 1);
  EXPECT_EQ(avg.n_windows.back(), 2);
  const auto last = static_cast<std::size_t>(avg.years.size() - 1);
  EXPECT_NEAR(*avg.value[last], 0.5 * (runs[0].tables.back()->total + runs[1].tables.back()->total), 1e-12);
  EXPECT_THROW(average_over_windows(panel, {}, o), ConfigError);
}

TEST(Rolling, WorkerCountDoesNotChangeResults) {
  std::mt19937_64 rng(42);
  const auto panel = sim::panel_of(sim::gaussian(rng, 70, 3));
  SpilloverOptions a, b;
  b.workers = 4;
  const auto ra = rolling_spillover(panel, 30, a), rb = rolling_spillover(panel, 30, b);
  for (std::size_t k = 0; k < ra.tables.size(); ++k) EXPECT_EQ(ra.tables[k]->total, rb.tables[k]->total);
}

TEST(Rolling, PlantedBreakRaisesIndex) {
  std::mt19937_64 rng(51);
  const Eigen::MatrixXd before = coupled_phi(3, 0.0), after = coupled_phi(3, 0.4);
  const auto data = sim::simulate_var1(rng, 200, before, after, 100, Eigen::MatrixXd::Identity(3, 3));
  const auto avg = average_over_windows(sim::panel_of(data), {30, 35, 40}, {});
  double pre = 0, post = 0;
  int npre = 0, npost = 0;
  for (std::size_t k = 0; k < avg.years.size(); ++k) {
    const int row = avg.years[k] - 1600;
    if (row < 100) { pre += *avg.value[k]; ++npre; }
    else if (row >= 140) { post += *avg.value[k]; ++npost; }
  }
  EXPECT_GT(post / npost - pre / npre, 10.0);
}

TEST(SpilloverIo, TableLayout) {
  Eigen::MatrixXd d(2, 2);
  d << 0.75, 0.5, 0.25, 0.5;
  const auto t = spillover_table(shares(d), {"Paris", "Rome"});
  std::ostringstream os;
  write_spillover_table(os, t);
  EXPECT_EQ(os.str(),
            ",Paris,Rome,To Others\n"
            "Paris,75,50,50\n"
            "Rome,25,50,25\n"
            "From Others,25,50,37.5\n");
}

TEST(SpilloverIo, JsonRoundTrip) {
  std::mt19937_64 rng(61);
  const auto t = spillover_table(shares(random_column_stochastic(rng, 4)), sim::labels(4));
  const auto j = spillover_table_to_json(t);
  const auto back = spillover_table_from_json(nlohmann::ordered_json::parse(j.dump()));
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_LE((back.fevd.d - t.fevd.d).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(back.total, t.total, 1e-12);
  EXPECT_THROW(spillover_table_from_json(nlohmann::ordered_json{{"format", "other"}}), DataError);
}

TEST(SpilloverIo, IndexSeriesWritesNa) {
  AveragedIndex idx{{1700, 1701}, {12.5, std::nullopt}, {2, 0}};
  std::ostringstream os;
  write_index_series(os, idx);
  EXPECT_EQ(os.str(), "year,value,n_windows\n1700,12.5,2\n1701,NA,0\n");
}
