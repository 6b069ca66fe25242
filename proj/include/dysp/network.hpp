#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/spillover.hpp"

namespace dysp {

struct GeoCoord {
  double lat = 0.0;
  double lon = 0.0;
};

using CoordinateMap = std::map<std::string, GeoCoord>;

enum class NodeRole { transmitter, receiver };

inline std::string to_string(NodeRole r) { return r == NodeRole::transmitter ? "transmitter" : "receiver"; }

/// Directed weighted view of a spillover table. Nodes are sorted by label,
/// edges by (source label, target label). Weights are in percentage points.
struct SpilloverGraph {
  struct Node {
    std::string label;
    double net = 0.0;
    NodeRole role = NodeRole::receiver;
    double size = 0.0;  // log(1 + outward weight)
    double to_others = 0.0;
    double from_others = 0.0;
    bool strong_transmitter = false;  // outward above the 75th percentile of nodes
    bool weak_receiver = false;       // inward above the 75th percentile of nodes
    std::optional<GeoCoord> geo;
  };
  struct Edge {
    std::size_t source = 0;  // node indices
    std::size_t target = 0;
    double weight = 0.0;
    bool emphasis = false;
  };
  std::vector<Node> nodes;
  std::vector<Edge> edges;
};

/// Edges at or below retain_above are dropped; survivors above
/// highlight_above are marked for emphasis.
struct ThresholdSpec {
  double retain_above = 0.0;
  double highlight_above = 0.0;

  void validate() const {
    if (!(retain_above >= 0.0 && highlight_above >= retain_above))
      throw ConfigError("threshold spec needs highlight_above >= retain_above >= 0");
  }
};

namespace detail {

inline NodeRole role_for(double net) { return net > 0.0 ? NodeRole::transmitter : NodeRole::receiver; }

inline void mark_quadrants(std::vector<SpilloverGraph::Node>& nodes) {
  if (nodes.empty()) return;
  std::vector<double> outw, inw;
  for (const auto& n : nodes) {
    outw.push_back(n.to_others);
    inw.push_back(n.from_others);
  }
  std::sort(outw.begin(), outw.end());
  std::sort(inw.begin(), inw.end());
  const double q_out = quantile_type7(outw, 0.75), q_in = quantile_type7(inw, 0.75);
  for (auto& n : nodes) {
    n.strong_transmitter = n.to_others > q_out;
    n.weak_receiver = n.from_others > q_in;
  }
}

}  // namespace detail

inline SpilloverGraph to_graph(const SpilloverTable& table, const CoordinateMap* coords = nullptr,
                               std::vector<std::string>* warnings = nullptr) {
  const auto n = static_cast<std::size_t>(table.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return table.labels[a] < table.labels[b]; });
  SpilloverGraph g;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(order[k]);
    SpilloverGraph::Node node;
    node.label = table.labels[order[k]];
    node.net = table.net(i);
    node.role = detail::role_for(node.net);
    node.to_others = table.to_others(i);
    node.from_others = table.from_others(i);
    node.size = std::log1p(std::max(0.0, node.to_others));
    if (coords) {
      if (const auto it = coords->find(node.label); it != coords->end()) node.geo = it->second;
      else if (warnings) warnings->push_back("no coordinates for '" + node.label + "'; emitted without geo");
    }
    g.nodes.push_back(std::move(node));
  }
  detail::mark_quadrants(g.nodes);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b)
        g.edges.push_back({a, b,
                           std::max(0.0, table.fevd.d(static_cast<Eigen::Index>(order[a]),
                                                      static_cast<Eigen::Index>(order[b]))),
                           false});
  return g;
}

/// Drops weak edges and tags strong ones. Node attributes keep describing the
/// full table unless `recompute_nodes` is set, in which case net, size and
/// role are rebuilt from the surviving edges.
inline SpilloverGraph apply_threshold(const SpilloverGraph& g, const ThresholdSpec& spec,
                                      bool recompute_nodes = false) {
  spec.validate();
  SpilloverGraph out;
  out.nodes = g.nodes;
  for (const auto& e : g.edges) {
    if (e.weight <= spec.retain_above) continue;
    auto kept = e;
    kept.emphasis = e.weight > spec.highlight_above;
    out.edges.push_back(kept);
  }
  if (recompute_nodes) {
    for (auto& n : out.nodes) n.to_others = n.from_others = 0.0;
    for (const auto& e : out.edges) {
      out.nodes[e.source].to_others += e.weight;
      out.nodes[e.target].from_others += e.weight;
    }
    for (auto& n : out.nodes) {
      n.net = n.to_others - n.from_others;
      n.role = detail::role_for(n.net);
      n.size = std::log1p(n.to_others);
    }
    detail::mark_quadrants(out.nodes);
  }
  return out;
}

/// Reads "label, lat, lon" rows; a leading header row is skipped.
inline CoordinateMap load_coordinates(std::istream& in, char delim = ',') {
  CoordinateMap m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_row(line, delim);
    double lat = 0, lon = 0;
    const bool numeric = f.size() == 3 && detail::parse_double(f[1], lat) && detail::parse_double(f[2], lon);
    if (!numeric) {
      if (lineno == 1) continue;
      throw DataError("coordinates row " + std::to_string(lineno) + ": expected label, lat, lon");
    }
    m[f[0]] = {lat, lon};
  }
  return m;
}

enum class GraphFormat { dot, graphml, json };

inline GraphFormat parse_graph_format(const std::string& s) {
  if (s == "dot") return GraphFormat::dot;
  if (s == "graphml") return GraphFormat::graphml;
  if (s == "json") return GraphFormat::json;
  throw ConfigError("unsupported graph format '" + s + "' (expected dot, graphml or json)");
}

inline std::string file_extension(GraphFormat f) {
  switch (f) {
    case GraphFormat::dot: return "dot";
    case GraphFormat::graphml: return "graphml";
    case GraphFormat::json: return "json";
  }
  return "txt";
}

namespace detail {

inline std::string dot_id(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline void write_dot(std::ostream& out, const SpilloverGraph& g) {
  out << "digraph spillover {\n";
  for (const auto& n : g.nodes) {
    out << "  " << dot_id(n.label) << " [net=" << fmt_num(n.net) << ", role=\"" << to_string(n.role)
        << "\", size=" << fmt_num(n.size) << ", to_others=" << fmt_num(n.to_others)
        << ", from_others=" << fmt_num(n.from_others)
        << ", strong_transmitter=" << (n.strong_transmitter ? "true" : "false")
        << ", weak_receiver=" << (n.weak_receiver ? "true" : "false");
    if (n.geo) out << ", lat=" << fmt_num(n.geo->lat) << ", lon=" << fmt_num(n.geo->lon);
    out << ", style=filled, fillcolor=\"" << (n.role == NodeRole::transmitter ? "blue" : "red")
        << "\"];\n";
  }
  for (const auto& e : g.edges) {
    out << "  " << dot_id(g.nodes[e.source].label) << " -> " << dot_id(g.nodes[e.target].label)
        << " [weight=" << fmt_num(e.weight);
    if (e.emphasis) out << ", emphasis=true, color=\"orange\"";
    out << "];\n";
  }
  out << "}\n";
}

inline void write_graphml(std::ostream& out, const SpilloverGraph& g) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
         "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
         "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
         "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n"
         "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n"
         "  <key id=\"net\" for=\"node\" attr.name=\"net\" attr.type=\"double\"/>\n"
         "  <key id=\"role\" for=\"node\" attr.name=\"role\" attr.type=\"string\"/>\n"
         "  <key id=\"size\" for=\"node\" attr.name=\"size\" attr.type=\"double\"/>\n"
         "  <key id=\"to_others\" for=\"node\" attr.name=\"to_others\" attr.type=\"double\"/>\n"
         "  <key id=\"from_others\" for=\"node\" attr.name=\"from_others\" attr.type=\"double\"/>\n"
         "  <key id=\"strong_transmitter\" for=\"node\" attr.name=\"strong_transmitter\" attr.type=\"boolean\"/>\n"
         "  <key id=\"weak_receiver\" for=\"node\" attr.name=\"weak_receiver\" attr.type=\"boolean\"/>\n"
         "  <key id=\"lat\" for=\"node\" attr.name=\"lat\" attr.type=\"double\"/>\n"
         "  <key id=\"lon\" for=\"node\" attr.name=\"lon\" attr.type=\"double\"/>\n"
         "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n"
         "  <key id=\"emphasis\" for=\"edge\" attr.name=\"emphasis\" attr.type=\"boolean\"/>\n"
         "  <graph id=\"spillover\" edgedefault=\"directed\">\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    out << "    <node id=\"n" << i << "\">\n"
        << "      <data key=\"label\">" << xml_escape(n.label) << "</data>\n"
        << "      <data key=\"net\">" << fmt_num(n.net) << "</data>\n"
        << "      <data key=\"role\">" << to_string(n.role) << "</data>\n"
        << "      <data key=\"size\">" << fmt_num(n.size) << "</data>\n"
        << "      <data key=\"to_others\">" << fmt_num(n.to_others) << "</data>\n"
        << "      <data key=\"from_others\">" << fmt_num(n.from_others) << "</data>\n"
        << "      <data key=\"strong_transmitter\">" << (n.strong_transmitter ? "true" : "false") << "</data>\n"
        << "      <data key=\"weak_receiver\">" << (n.weak_receiver ? "true" : "false") << "</data>\n";
    if (n.geo)
      out << "      <data key=\"lat\">" << fmt_num(n.geo->lat) << "</data>\n"
          << "      <data key=\"lon\">" << fmt_num(n.geo->lon) << "</data>\n";
    out << "    </node>\n";
  }
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto& e = g.edges[k];
    out << "    <edge id=\"e" << k << "\" source=\"n" << e.source << "\" target=\"n" << e.target << "\">\n"
        << "      <data key=\"weight\">" << fmt_num(e.weight) << "</data>\n"
        << "      <data key=\"emphasis\">" << (e.emphasis ? "true" : "false") << "</data>\n"
        << "    </edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
}

}  // namespace detail

/// Structured form: {"format": "dysp.spillover_graph", "version": 1, nodes, edges}.
/// Edges reference nodes by label.
inline nlohmann::ordered_json graph_to_json(const SpilloverGraph& g) {
  nlohmann::ordered_json j;
  j["format"] = "dysp.spillover_graph";
  j["version"] = 1;
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nlohmann::ordered_json o;
    o["label"] = n.label;
    o["net"] = n.net;
    o["role"] = to_string(n.role);
    o["size"] = n.size;
    o["to_others"] = n.to_others;
    o["from_others"] = n.from_others;
    o["strong_transmitter"] = n.strong_transmitter;
    o["weak_receiver"] = n.weak_receiver;
    if (n.geo) {
      o["lat"] = n.geo->lat;
      o["lon"] = n.geo->lon;
    }
    nodes.push_back(std::move(o));
  }
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) {
    nlohmann::ordered_json o;
    o["source"] = g.nodes[e.source].label;
    o["target"] = g.nodes[e.target].label;
    o["weight"] = e.weight;
    o["emphasis"] = e.emphasis;
    edges.push_back(std::move(o));
  }
  j["nodes"] = nodes;
  j["edges"] = edges;
  return j;
}

inline SpilloverGraph graph_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", "") != "dysp.spillover_graph" || j.value("version", 0) != 1)
    throw DataError("not a version-1 dysp.spillover_graph document");
  SpilloverGraph g;
  std::map<std::string, std::size_t> index;
  for (const auto& o : j.at("nodes")) {
    SpilloverGraph::Node n;
    n.label = o.at("label").get<std::string>();
    n.net = o.at("net").get<double>();
    n.role = o.at("role").get<std::string>() == "transmitter" ? NodeRole::transmitter : NodeRole::receiver;
    n.size = o.at("size").get<double>();
    n.to_others = o.at("to_others").get<double>();
    n.from_others = o.at("from_others").get<double>();
    n.strong_transmitter = o.at("strong_transmitter").get<bool>();
    n.weak_receiver = o.at("weak_receiver").get<bool>();
    if (o.contains("lat")) n.geo = GeoCoord{o.at("lat").get<double>(), o.at("lon").get<double>()};
    index[n.label] = g.nodes.size();
    g.nodes.push_back(std::move(n));
  }
  for (const auto& o : j.at("edges")) {
    const auto s = index.find(o.at("source").get<std::string>());
    const auto t = index.find(o.at("target").get<std::string>());
    if (s == index.end() || t == index.end()) throw DataError("edge references an unknown node");
    g.edges.push_back({s->second, t->second, o.at("weight").get<double>(), o.at("emphasis").get<bool>()});
  }
  return g;
}

inline void export_graph(std::ostream& out, const SpilloverGraph& g, GraphFormat format) {
  switch (format) {
    case GraphFormat::dot: detail::write_dot(out, g); break;
    case GraphFormat::graphml: detail::write_graphml(out, g); break;
    case GraphFormat::json: out << graph_to_json(g).dump(2) << '\n'; break;
  }
}

inline std::string export_graph(const SpilloverGraph& g, GraphFormat format) {
  std::ostringstream os;
  export_graph(os, g, format);
  return os.str();
}

}  // namespace dysp
