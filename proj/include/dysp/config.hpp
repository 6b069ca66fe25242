#pragma once

// Run configuration: a flat key = value file.
//
//   # prices and catalog
//   panel   = prices.csv
//   catalog = conflicts.csv
//   windows = 30-40          # inclusive range or a list: 30, 35, 40
//   order   = auto(bic)      # or a fixed lag order
//   sea.conflicts = 1618-1648, 1688-1697
//
// One assignment per line, '#' starts a comment, surrounding blanks are
// ignored. Keys are case-sensitive; unknown and repeated keys are errors.
// Relative paths resolve against the directory that holds the file.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dysp/adf.hpp"
#include "dysp/conflict.hpp"
#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/fevd.hpp"
#include "dysp/network.hpp"
#include "dysp/panel.hpp"
#include "dysp/sea.hpp"
#include "dysp/spillover.hpp"
#include "dysp/var.hpp"
#include "dysp/year_series.hpp"

namespace dysp {

struct OrderSpec {
  bool automatic = false;
  int p = 1;
  InformationCriterion criterion = InformationCriterion::bic;
};

/// CPI control in the regressions: cross-city mean level in the year itself,
/// or that mean averaged over the trailing (shortest) window.
enum class CpiControl { year, window };

struct RunConfig {
  std::string panel;
  std::string catalog;
  std::string coords;
  char delimiter = ',';
  std::string year_column = "year";
  GapPolicy gaps = GapPolicy::strict;

  double winsorize = 0.01;  // 0 disables
  bool difference = true;

  OrderSpec order;
  int max_order = 4;
  int horizon = 10;
  FevdMethod method = FevdMethod::generalized;
  bool normalize = true;
  CovarianceDenominator covariance = CovarianceDenominator::dof_adjusted;
  bool intercept = true;
  std::vector<int> windows = {30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40};

  std::vector<YearRange> exclusions = {{1628, 1648}};
  std::set<int> regions = {3, 4};
  CatalogSchema catalog_schema;

  int nw_lag = -1;  // -1: automatic bandwidth
  std::vector<double> quantiles = {0.25, 0.5, 0.75, 0.9};
  int bootstrap = 1000;
  CpiControl cpi_control = CpiControl::year;

  int sea_window = 5;
  int sea_n_boot = 10000;
  std::vector<YearRange> sea_conflicts = {{1618, 1648}, {1688, 1697}, {1700, 1721}, {1701, 1714}, {1756, 1762}};
  std::vector<YearRange> sea_exclusions = {{1628, 1648}};
  BandSides sea_sides = BandSides::two_sided;
  EpochNormalization sea_normalization = EpochNormalization::standardize;

  std::vector<int> snapshot_years;  // empty: nearest to default_snapshot_targets()
  ThresholdSpec threshold{0.0, 10.0};
  GraphFormat network_format = GraphFormat::graphml;

  int adf_lag = 10;
  AdfForm adf_form = AdfForm::constant;

  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string output = "run";

  [[nodiscard]] PanelSchema panel_schema() const { return {delimiter, year_column, gaps}; }

  [[nodiscard]] SpilloverOptions spillover_options(int p) const {
    SpilloverOptions o;
    o.p = p;
    o.horizon = horizon;
    o.method = method;
    o.normalize = normalize;
    o.var.intercept = intercept;
    o.var.covariance = covariance;
    o.workers = workers;
    return o;
  }
};

/// Window-end years the snapshots aim for when none are configured: before
/// 1618, the end of 1618-1648, the end of 1700-1721 and two points in 1756-1763.
inline const std::vector<int>& default_snapshot_targets() {
  static const std::vector<int> y = {1617, 1648, 1721, 1757, 1763};
  return y;
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline long long cfg_int(const std::string& key, const std::string& v) {
  long long x = 0;
  if (!parse_int(v, x)) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

inline double cfg_double(const std::string& key, const std::string& v) {
  double x = 0;
  if (!parse_double(v, x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<YearRange> cfg_ranges(const std::string& key, const std::string& v) {
  std::vector<YearRange> out;
  if (v == "none") return out;
  try {
    for (const auto& s : split_list(v)) out.push_back(parse_year_range(s));
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
  return out;
}

/// "30-40" expands to every length in the range; "30, 35, 40" is taken as given.
inline std::vector<int> cfg_windows(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& s : split_list(v)) {
    const auto dash = s.find('-');
    if (dash == std::string::npos) {
      out.push_back(static_cast<int>(cfg_int(key, s)));
      continue;
    }
    const auto a = cfg_int(key, trim(s.substr(0, dash))), b = cfg_int(key, trim(s.substr(dash + 1)));
    if (b < a) throw ConfigError(key + ": range '" + s + "' ends before it starts");
    for (auto w = a; w <= b; ++w) out.push_back(static_cast<int>(w));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline char cfg_delimiter(const std::string& key, const std::string& v) {
  if (v == "tab" || v == "\\t") return '\t';
  if (v == "comma") return ',';
  if (v == "semicolon") return ';';
  if (v.size() == 1) return v[0];
  throw ConfigError(key + ": expected a single character, comma, semicolon or tab");
}

inline std::string delimiter_name(char c) {
  if (c == '\t') return "tab";
  if (c == ',') return "comma";
  if (c == ';') return "semicolon";
  return std::string(1, c);
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + f(v[i]);
  return s;
}

inline std::string range_text(const YearRange& r) {
  return r.first == r.last ? std::to_string(r.first) : std::to_string(r.first) + "-" + std::to_string(r.last);
}

inline std::string ranges_text(const std::vector<YearRange>& v) {
  return v.empty() ? "none" : join<YearRange>(v, range_text);
}

}  // namespace detail

/// Sets one key. Throws ConfigError for unknown keys and malformed values.
inline void set_option(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  if (key == "panel") c.panel = v;
  else if (key == "catalog") c.catalog = v;
  else if (key == "coords") c.coords = v;
  else if (key == "delimiter") c.delimiter = cfg_delimiter(key, v);
  else if (key == "year_column") c.year_column = v;
  else if (key == "gap_policy") {
    if (v == "strict") c.gaps = GapPolicy::strict;
    else if (v == "lenient") c.gaps = GapPolicy::lenient;
    else throw ConfigError("gap_policy: expected strict or lenient");
  } else if (key == "winsorize") c.winsorize = v == "none" ? 0.0 : cfg_double(key, v);
  else if (key == "difference") c.difference = parse_bool(key, v);
  else if (key == "order") {
    if (v.rfind("auto", 0) == 0) {
      c.order.automatic = true;
      const auto open = v.find('(');
      if (open != std::string::npos) {
        if (v.back() != ')') throw ConfigError("order: expected auto(aic|bic|hq)");
        c.order.criterion = parse_criterion(v.substr(open + 1, v.size() - open - 2));
      } else if (v != "auto") {
        throw ConfigError("order: expected a positive integer or auto(criterion)");
      }
    } else {
      c.order.automatic = false;
      c.order.p = static_cast<int>(cfg_int(key, v));
    }
  } else if (key == "max_order") c.max_order = static_cast<int>(cfg_int(key, v));
  else if (key == "horizon") c.horizon = static_cast<int>(cfg_int(key, v));
  else if (key == "method") c.method = parse_fevd_method(v);
  else if (key == "normalize") c.normalize = parse_bool(key, v);
  else if (key == "covariance") {
    if (v == "dof" || v == "dof-adjusted") c.covariance = CovarianceDenominator::dof_adjusted;
    else if (v == "ml") c.covariance = CovarianceDenominator::ml;
    else throw ConfigError("covariance: expected dof or ml");
  } else if (key == "intercept") c.intercept = parse_bool(key, v);
  else if (key == "windows") c.windows = cfg_windows(key, v);
  else if (key == "exclusions") c.exclusions = cfg_ranges(key, v);
  else if (key == "regions") {
    c.regions.clear();
    for (const auto& s : split_list(v)) c.regions.insert(static_cast<int>(cfg_int(key, s)));
  } else if (key == "catalog.delimiter") c.catalog_schema.delimiter = cfg_delimiter(key, v);
  else if (key == "catalog.id") c.catalog_schema.id = v;
  else if (key == "catalog.name") c.catalog_schema.name = v;
  else if (key == "catalog.region") c.catalog_schema.region = v;
  else if (key == "catalog.start") c.catalog_schema.start = v;
  else if (key == "catalog.end") c.catalog_schema.end = v;
  else if (key == "catalog.fatalities") c.catalog_schema.fatalities = v;
  else if (key == "nw_lag") c.nw_lag = v == "auto" ? -1 : static_cast<int>(cfg_int(key, v));
  else if (key == "quantiles") {
    c.quantiles.clear();
    for (const auto& s : split_list(v)) c.quantiles.push_back(cfg_double(key, s));
  } else if (key == "bootstrap") c.bootstrap = static_cast<int>(cfg_int(key, v));
  else if (key == "cpi_control") {
    if (v == "year") c.cpi_control = CpiControl::year;
    else if (v == "window") c.cpi_control = CpiControl::window;
    else throw ConfigError("cpi_control: expected year or window");
  } else if (key == "sea.window") c.sea_window = static_cast<int>(cfg_int(key, v));
  else if (key == "sea.n_boot") c.sea_n_boot = static_cast<int>(cfg_int(key, v));
  else if (key == "sea.conflicts") c.sea_conflicts = cfg_ranges(key, v);
  else if (key == "sea.exclusions") c.sea_exclusions = cfg_ranges(key, v);
  else if (key == "sea.sides") {
    if (v == "two-sided") c.sea_sides = BandSides::two_sided;
    else if (v == "upper" || v == "one-sided") c.sea_sides = BandSides::one_sided_upper;
    else throw ConfigError("sea.sides: expected two-sided or upper");
  } else if (key == "sea.normalization") {
    if (v == "standardize") c.sea_normalization = EpochNormalization::standardize;
    else if (v == "none") c.sea_normalization = EpochNormalization::none;
    else throw ConfigError("sea.normalization: expected standardize or none");
  } else if (key == "snapshot_years") {
    c.snapshot_years.clear();
    if (v != "auto")
      for (const auto& s : split_list(v)) c.snapshot_years.push_back(static_cast<int>(cfg_int(key, s)));
  } else if (key == "network.retain") c.threshold.retain_above = cfg_double(key, v);
  else if (key == "network.highlight") c.threshold.highlight_above = cfg_double(key, v);
  else if (key == "network.format") c.network_format = parse_graph_format(v);
  else if (key == "adf.lag") c.adf_lag = static_cast<int>(cfg_int(key, v));
  else if (key == "adf.form") c.adf_form = parse_adf_form(v);
  else if (key == "seed") {
    const auto s = cfg_int(key, v);
    if (s < 0) throw ConfigError("seed: expected a nonnegative integer");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "workers") {
    const auto w = cfg_int(key, v);
    if (w < 1 || w > 256) throw ConfigError("workers: expected 1..256");
    c.workers = static_cast<unsigned>(w);
  } else if (key == "output") c.output = v;
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Every key with its effective value, in a fixed order. Reading the list
/// back through set_option reproduces the configuration.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  using namespace detail;
  const auto num = [](double x) { return fmt_num(x); };
  const auto str_int = [](const int& x) { return std::to_string(x); };
  std::vector<std::pair<std::string, std::string>> e = {
      {"panel", c.panel},
      {"catalog", c.catalog},
      {"coords", c.coords},
      {"delimiter", delimiter_name(c.delimiter)},
      {"year_column", c.year_column},
      {"gap_policy", c.gaps == GapPolicy::strict ? "strict" : "lenient"},
      {"winsorize", num(c.winsorize)},
      {"difference", c.difference ? "true" : "false"},
      {"order", c.order.automatic ? "auto(" + to_string(c.order.criterion) + ")" : std::to_string(c.order.p)},
      {"max_order", std::to_string(c.max_order)},
      {"horizon", std::to_string(c.horizon)},
      {"method", to_string(c.method)},
      {"normalize", c.normalize ? "true" : "false"},
      {"covariance", c.covariance == CovarianceDenominator::ml ? "ml" : "dof"},
      {"intercept", c.intercept ? "true" : "false"},
      {"windows", join<int>(c.windows, str_int)},
      {"exclusions", ranges_text(c.exclusions)},
      {"regions", join<int>(std::vector<int>(c.regions.begin(), c.regions.end()), str_int)},
      {"catalog.delimiter", delimiter_name(c.catalog_schema.delimiter)},
      {"catalog.id", c.catalog_schema.id},
      {"catalog.name", c.catalog_schema.name},
      {"catalog.region", c.catalog_schema.region},
      {"catalog.start", c.catalog_schema.start},
      {"catalog.end", c.catalog_schema.end},
      {"catalog.fatalities", c.catalog_schema.fatalities},
      {"nw_lag", c.nw_lag < 0 ? "auto" : std::to_string(c.nw_lag)},
      {"quantiles", join<double>(c.quantiles, num)},
      {"bootstrap", std::to_string(c.bootstrap)},
      {"cpi_control", c.cpi_control == CpiControl::year ? "year" : "window"},
      {"sea.window", std::to_string(c.sea_window)},
      {"sea.n_boot", std::to_string(c.sea_n_boot)},
      {"sea.conflicts", ranges_text(c.sea_conflicts)},
      {"sea.exclusions", ranges_text(c.sea_exclusions)},
      {"sea.sides", c.sea_sides == BandSides::two_sided ? "two-sided" : "upper"},
      {"sea.normalization", c.sea_normalization == EpochNormalization::standardize ? "standardize" : "none"},
      {"snapshot_years", c.snapshot_years.empty() ? "auto" : join<int>(c.snapshot_years, str_int)},
      {"network.retain", num(c.threshold.retain_above)},
      {"network.highlight", num(c.threshold.highlight_above)},
      {"network.format", file_extension(c.network_format)},
      {"adf.lag", std::to_string(c.adf_lag)},
      {"adf.form", to_string(c.adf_form)},
      {"seed", std::to_string(c.seed)},
      {"workers", std::to_string(c.workers)},
      {"output", c.output},
  };
  return e;
}

inline std::string write_config(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_entries(c)) s += k + " = " + v + "\n";
  return s;
}

/// Hash of the analysis parameters. Input paths enter by file name only;
/// output location and worker count do not change results and are left out.
inline std::string config_hash(const RunConfig& c) {
  std::string s;
  for (const auto& [k, v] : config_entries(c)) {
    if (k == "output" || k == "workers") continue;
    const bool path = k == "panel" || k == "catalog" || k == "coords";
    s += k + "=" + (path && !v.empty() ? std::filesystem::path(v).filename().string() : v) + "\n";
  }
  return detail::hex64(detail::fnv1a64(s));
}

/// Applies the assignments in a configuration stream on top of `base`.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {},
                              RunConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": missing key");
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' is repeated");
    const bool path = key == "panel" || key == "catalog" || key == "coords" || key == "output";
    if (path && !value.empty() && !base_dir.empty() && std::filesystem::path(value).is_relative())
      value = (base_dir / value).lexically_normal().string();
    try {
      set_option(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.parent_path(), std::move(base));
}

/// Checks that need no data: ranges, set sizes and the presence of inputs.
inline void validate_config(const RunConfig& c, bool require_panel = true) {
  namespace fs = std::filesystem;
  if (require_panel && c.panel.empty()) throw ConfigError("no panel file configured");
  for (const auto* p : {&c.panel, &c.catalog, &c.coords})
    if (!p->empty() && !fs::is_regular_file(*p)) throw ConfigError("input file '" + *p + "' does not exist");
  if (!(c.winsorize >= 0.0 && c.winsorize < 0.5)) throw ConfigError("winsorize must lie in [0, 0.5)");
  if (c.order.automatic ? c.max_order < 1 : c.order.p < 1) throw ConfigError("VAR order must be at least 1");
  if (c.horizon < 1) throw ConfigError("horizon must be at least 1");
  if (c.windows.empty()) throw ConfigError("window set is empty");
  if (c.windows.front() < 2) throw ConfigError("window lengths must be at least 2");
  if (c.method != FevdMethod::cholesky && !c.normalize)
    throw ConfigError("unnormalized generalized shares cannot form spillover tables; use normalize = true");
  if (c.nw_lag < -1) throw ConfigError("nw_lag must be auto or nonnegative");
  if (c.quantiles.empty()) throw ConfigError("quantile set is empty");
  for (double q : c.quantiles)
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantiles must lie in (0, 1)");
  if (c.bootstrap < 2) throw ConfigError("bootstrap must be at least 2");
  if (c.sea_window < 0) throw ConfigError("sea.window must be nonnegative");
  if (c.sea_n_boot < 100) throw ConfigError("sea.n_boot must be at least 100");
  if (c.adf_lag < 0) throw ConfigError("adf.lag must be nonnegative");
  c.threshold.validate();
}

/// First infeasible combination of model settings and panel shape, with the
/// stage it would stop.
struct DimensionIssue {
  std::string stage;
  std::string message;
};

inline std::optional<DimensionIssue> check_dimensions(const RunConfig& c, int n_series, int n_rows) {
  const int rows = n_rows - (c.difference ? 1 : 0);
  if (rows < 3) return DimensionIssue{"difference", "panel has too few rows"};
  if (rows <= 2 * (c.adf_lag + 2))
    return DimensionIssue{"adf", "series of " + std::to_string(rows) + " rows is too short for ADF lag " +
                                     std::to_string(c.adf_lag)};
  const int p = c.order.automatic ? c.max_order : c.order.p;
  const int need_full = min_var_rows(n_series, p, c.intercept);
  if (rows < need_full)
    return DimensionIssue{"spillover", "full-sample VAR(" + std::to_string(p) + ") on " + std::to_string(n_series) +
                                           " series needs " + std::to_string(need_full) + " rows, found " +
                                           std::to_string(rows) + ": rank deficiency (curse of dimensionality)"};
  // rolling windows use the order actually chosen, which is at most p
  const int p_roll = c.order.automatic ? 1 : c.order.p;
  for (int w : c.windows) {
    try {
      check_window(w, n_series, rows, c.spillover_options(p_roll));
    } catch (const ConfigError& e) {
      return DimensionIssue{"spillover", e.what()};
    }
  }
  return std::nullopt;
}

}  // namespace dysp
