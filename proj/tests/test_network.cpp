#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "dysp/network.hpp"

using namespace dysp;

namespace {

SpilloverTable three_city_table() {
  Eigen::MatrixXd d(3, 3);
  // columns are targets and sum to one
  d << 0.70, 0.30, 0.05,
       0.20, 0.60, 0.15,
       0.10, 0.10, 0.80;
  return spillover_table({10, FevdMethod::generalized, d, true}, {"Rome", "Amsterdam", "Paris"});
}

}  // namespace

TEST(Network, NodesSortedAndEdgesComplete) {
  const auto g = to_graph(three_city_table());
  ASSERT_EQ(g.nodes.size(), 3u);
  EXPECT_EQ(g.nodes[0].label, "Amsterdam");
  EXPECT_EQ(g.nodes[1].label, "Paris");
  EXPECT_EQ(g.nodes[2].label, "Rome");
  EXPECT_EQ(g.edges.size(), 6u);
  // Rome -> Amsterdam is d(0, 1) = 30 points
  bool found = false;
  for (const auto& e : g.edges)
    if (g.nodes[e.source].label == "Rome" && g.nodes[e.target].label == "Amsterdam") {
      EXPECT_DOUBLE_EQ(e.weight, 30.0);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Network, NodeAttributes) {
  const auto t = three_city_table();
  const auto g = to_graph(t);
  double net_sum = 0;
  for (const auto& n : g.nodes) {
    net_sum += n.net;
    EXPECT_EQ(n.role, n.net > 0 ? NodeRole::transmitter : NodeRole::receiver);
    EXPECT_DOUBLE_EQ(n.size, std::log1p(n.to_others));
  }
  EXPECT_NEAR(net_sum, 0.0, 1e-12);
  // Rome sends 30 + 5 = 35 and receives 20 + 10 = 30
  EXPECT_NEAR(g.nodes[2].to_others, 35.0, 1e-12);
  EXPECT_NEAR(g.nodes[2].net, 5.0, 1e-12);
  EXPECT_EQ(g.nodes[2].role, NodeRole::transmitter);
}

TEST(Network, Threshold) {
  const auto g = to_graph(three_city_table());
  const auto k = apply_threshold(g, {15.0, 25.0});
  // surviving weights: 30 (Rome->Amsterdam), 20 (Amsterdam->Rome)
  ASSERT_EQ(k.edges.size(), 2u);
  int emphasized = 0;
  for (const auto& e : k.edges) {
    EXPECT_GT(e.weight, 15.0);
    emphasized += e.emphasis;
  }
  EXPECT_EQ(emphasized, 1);
  EXPECT_EQ(k.nodes[2].net, g.nodes[2].net);
  const auto r = apply_threshold(g, {15.0, 25.0}, true);
  EXPECT_DOUBLE_EQ(r.nodes[2].net, 10.0);
  EXPECT_DOUBLE_EQ(r.nodes[1].to_others, 0.0);
  EXPECT_THROW(apply_threshold(g, {10.0, 5.0}), ConfigError);
  EXPECT_THROW(apply_threshold(g, {-1.0, 5.0}), ConfigError);
  EXPECT_EQ(apply_threshold(g, {0.0, 0.0}).edges.size(), 6u);
}

TEST(Network, Coordinates) {
  std::istringstream in("label,lat,lon\nRome,41.9,12.5\nParis,48.86,2.35\n");
  const auto coords = load_coordinates(in);
  ASSERT_EQ(coords.size(), 2u);
  std::vector<std::string> warnings;
  const auto g = to_graph(three_city_table(), &coords, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("Amsterdam"), std::string::npos);
  EXPECT_FALSE(g.nodes[0].geo);
  ASSERT_TRUE(g.nodes[2].geo);
  EXPECT_DOUBLE_EQ(g.nodes[2].geo->lat, 41.9);
  std::istringstream bad("label,lat,lon\nRome,north,12\n");
  EXPECT_THROW(load_coordinates(bad), DataError);
}

TEST(Network, Formats) {
  EXPECT_EQ(parse_graph_format("graphml"), GraphFormat::graphml);
  EXPECT_THROW(parse_graph_format("gexf"), ConfigError);
  const auto g = apply_threshold(to_graph(three_city_table()), {0.0, 25.0});
  const auto dot = export_graph(g, GraphFormat::dot);
  EXPECT_EQ(dot.rfind("digraph spillover {", 0), 0u);
  EXPECT_NE(dot.find("\"Rome\" -> \"Amsterdam\" [weight=30, emphasis=true"), std::string::npos);
  EXPECT_NE(dot.find("fillcolor=\"blue\""), std::string::npos);
  const auto xml = export_graph(g, GraphFormat::graphml);
  EXPECT_NE(xml.find("edgedefault=\"directed\""), std::string::npos);
  EXPECT_NE(xml.find("<data key=\"label\">Rome</data>"), std::string::npos);
}

TEST(Network, JsonExportParseExportIsByteIdentical) {
  std::istringstream in("Rome,41.9,12.5\nAmsterdam,52.37,4.9\nParis,48.86,2.35\n");
  const auto coords = load_coordinates(in);
  const auto g = apply_threshold(to_graph(three_city_table(), &coords), {5.0, 25.0});
  const auto first = export_graph(g, GraphFormat::json);
  const auto back = graph_from_json(nlohmann::ordered_json::parse(first));
  EXPECT_EQ(export_graph(back, GraphFormat::json), first);
  EXPECT_EQ(export_graph(back, GraphFormat::dot), export_graph(g, GraphFormat::dot));
}

TEST(Network, JsonRoundTripRandomTables) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 2 + rep % 6;
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = u(rng) / 3.0;
    for (int j = 0; j < n; ++j) d.col(j) /= d.col(j).sum();
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("city \"" + std::to_string(i) + "\" & co");
    const auto g = to_graph(spillover_table({10, FevdMethod::generalized, d, true}, labels));
    const auto s = export_graph(g, GraphFormat::json);
    EXPECT_EQ(export_graph(graph_from_json(nlohmann::ordered_json::parse(s)), GraphFormat::json), s);
  }
  EXPECT_THROW(graph_from_json(nlohmann::ordered_json{{"format", "dysp.spillover_graph"}}), DataError);
}

TEST(Network, EdgeCountAndIdentity) {
  const auto fourteen = to_graph(spillover_table({10, FevdMethod::generalized, Eigen::MatrixXd::Constant(14, 14, 1.0 / 14), true}));
  EXPECT_EQ(fourteen.edges.size(), 182u);
  const auto id = to_graph(spillover_table({10, FevdMethod::generalized, Eigen::MatrixXd::Identity(4, 4), true}));
  EXPECT_EQ(id.nodes.size(), 4u);
  EXPECT_TRUE(apply_threshold(id, {1e-9, 1e-9}).edges.empty());
}

TEST(Network, ThresholdOnSmallWeights) {
  SpilloverGraph g;
  g.nodes.resize(2);
  g.edges = {{0, 1, 0.1, false}, {1, 0, 0.3, false}, {0, 1, 0.7, false}};
  const auto k = apply_threshold(g, {0.2, 0.5});
  ASSERT_EQ(k.edges.size(), 2u);
  EXPECT_EQ(k.edges[0].weight, 0.3);
  EXPECT_FALSE(k.edges[0].emphasis);
  EXPECT_EQ(k.edges[1].weight, 0.7);
  EXPECT_TRUE(k.edges[1].emphasis);
}

TEST(NetworkProperty, RaisingRetainNeverAddsEdges) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd d(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) d(i, j) = u(rng);
  for (int j = 0; j < 6; ++j) d.col(j) /= d.col(j).sum();
  const auto g = to_graph(spillover_table({10, FevdMethod::generalized, d, true}));
  std::size_t last = g.edges.size();
  for (double r = 0.0; r <= 40.0; r += 0.5) {
    const auto k = apply_threshold(g, {r, r}).edges.size();
    EXPECT_LE(k, last);
    last = k;
  }
}
