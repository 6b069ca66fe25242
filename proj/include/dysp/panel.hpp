#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"

namespace dysp {

enum class TransformKind { raw, winsorized, first_differenced };

struct TransformStep {
  TransformKind kind = TransformKind::raw;
  double fraction = 0.0;  // winsorization fraction; unused otherwise

  friend bool operator==(const TransformStep&, const TransformStep&) = default;
};

inline std::string to_string(const TransformStep& s) {
  switch (s.kind) {
    case TransformKind::raw: return "raw";
    case TransformKind::winsorized: return "winsorized(" + detail::fmt_num(s.fraction) + ")";
    case TransformKind::first_differenced: return "first-differenced";
  }
  return "?";
}

/// Year-indexed T x N panel of price levels (row = year, column = location).
///
/// Years are strictly increasing with unit step, every value is finite, and
/// the lineage records which transforms produced the panel (empty for raw
/// ingested data). Instances are immutable.
class PricePanel {
 public:
  PricePanel(std::vector<int> years, std::vector<std::string> locations, Eigen::MatrixXd values,
             std::vector<TransformStep> lineage = {})
      : years_(std::move(years)),
        locations_(std::move(locations)),
        values_(std::move(values)),
        lineage_(std::move(lineage)) {
    if (values_.rows() != static_cast<Eigen::Index>(years_.size()) ||
        values_.cols() != static_cast<Eigen::Index>(locations_.size()))
      throw DataError("panel shape mismatch: values " + std::to_string(values_.rows()) + "x" +
                      std::to_string(values_.cols()) + " vs " + std::to_string(years_.size()) +
                      " years x " + std::to_string(locations_.size()) + " locations");
    for (std::size_t t = 1; t < years_.size(); ++t)
      if (years_[t] != years_[t - 1] + 1)
        throw DataError("panel years must be consecutive; " + std::to_string(years_[t - 1]) +
                        " is followed by " + std::to_string(years_[t]));
    if (!values_.allFinite()) throw DataError("panel contains non-finite values");
    for (const auto& s : lineage_)
      if (s.kind == TransformKind::winsorized && !(s.fraction > 0.0 && s.fraction < 0.5))
        throw DataError("winsorization fraction must lie in (0, 0.5)");
  }

  [[nodiscard]] const std::vector<int>& years() const noexcept { return years_; }
  [[nodiscard]] const std::vector<std::string>& locations() const noexcept { return locations_; }
  [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return values_; }
  [[nodiscard]] const std::vector<TransformStep>& lineage() const noexcept { return lineage_; }
  [[nodiscard]] Eigen::Index rows() const noexcept { return values_.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return values_.cols(); }

  [[nodiscard]] TransformKind kind() const noexcept {
    return lineage_.empty() ? TransformKind::raw : lineage_.back().kind;
  }

  [[nodiscard]] std::optional<Eigen::Index> location_index(const std::string& label) const {
    const auto it = std::find(locations_.begin(), locations_.end(), label);
    if (it == locations_.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - locations_.begin());
  }

  /// Rows [first, first + count) as a new panel with the same lineage.
  [[nodiscard]] PricePanel slice_rows(Eigen::Index first, Eigen::Index count) const {
    std::vector<int> yrs(years_.begin() + first, years_.begin() + first + count);
    return {std::move(yrs), locations_, values_.middleRows(first, count), lineage_};
  }

  /// Same data with columns reordered: column k of the result is column order[k].
  [[nodiscard]] PricePanel permute_columns(const std::vector<Eigen::Index>& order) const {
    Eigen::MatrixXd v(values_.rows(), static_cast<Eigen::Index>(order.size()));
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < order.size(); ++k) {
      v.col(static_cast<Eigen::Index>(k)) = values_.col(order[k]);
      labels.push_back(locations_[static_cast<std::size_t>(order[k])]);
    }
    return {years_, std::move(labels), std::move(v), lineage_};
  }

 private:
  std::vector<int> years_;
  std::vector<std::string> locations_;
  Eigen::MatrixXd values_;
  std::vector<TransformStep> lineage_;
};

enum class GapPolicy { strict, lenient };

struct PanelSchema {
  char delimiter = ',';
  std::string year_column = "year";
  GapPolicy gaps = GapPolicy::strict;
};

/// A break in the year sequence: `after` is followed directly by `before`.
struct YearGap {
  int after;
  int before;
};

struct PanelLoad {
  PricePanel panel;
  std::vector<YearGap> gaps;  // gaps found in the source, before truncation
};

/// Reads a delimited panel: header row, one year column, one column per location.
/// Rows are sorted by year. Gaps are an error under the strict policy; the
/// lenient policy keeps the longest contiguous block (earliest on ties).
inline PanelLoad load_panel(std::istream& in, const PanelSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("panel source is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_row(line, schema.delimiter);
  const auto year_it = std::find(header.begin(), header.end(), schema.year_column);
  if (year_it == header.end())
    throw DataError("missing year column '" + schema.year_column + "'");
  const auto year_col = static_cast<std::size_t>(year_it - header.begin());
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != year_col) labels.push_back(header[c]);
  if (labels.empty()) throw DataError("panel has no location columns");

  std::map<int, std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_row(line, schema.delimiter);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    long long year = 0;
    if (!detail::parse_int(fields[year_col], year))
      throw DataError("row " + std::to_string(lineno) + ", column '" + schema.year_column +
                      "': non-integer year '" + fields[year_col] + "'");
    std::vector<double> vals;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (c == year_col) continue;
      double v = 0;
      if (!detail::parse_double(fields[c], v))
        throw DataError("row " + std::to_string(lineno) + ", column '" + header[c] +
                        "': non-numeric value '" + fields[c] + "'");
      vals.push_back(v);
    }
    if (!rows.emplace(static_cast<int>(year), std::move(vals)).second)
      throw DataError("row " + std::to_string(lineno) + ": duplicate year " +
                      std::to_string(year));
  }
  if (rows.empty()) throw DataError("panel has no data rows");

  std::vector<int> years;
  for (const auto& [y, _] : rows) years.push_back(y);
  std::vector<YearGap> gaps;
  std::size_t best_first = 0, best_len = 1, run_first = 0;
  for (std::size_t t = 1; t <= years.size(); ++t) {
    const bool breaks = t == years.size() || years[t] != years[t - 1] + 1;
    if (t < years.size() && breaks) gaps.push_back({years[t - 1], years[t]});
    if (breaks) {
      if (t - run_first > best_len) {
        best_len = t - run_first;
        best_first = run_first;
      }
      run_first = t;
    }
  }
  if (!gaps.empty() && schema.gaps == GapPolicy::strict)
    throw DataError("gap in year sequence: " + std::to_string(gaps.front().after) +
                    " is followed by " + std::to_string(gaps.front().before) +
                    " (use the lenient gap policy to truncate)");
  if (gaps.empty()) best_len = years.size();

  Eigen::MatrixXd values(static_cast<Eigen::Index>(best_len),
                         static_cast<Eigen::Index>(labels.size()));
  std::vector<int> kept;
  for (std::size_t t = 0; t < best_len; ++t) {
    const int y = years[best_first + t];
    kept.push_back(y);
    const auto& r = rows.at(y);
    for (std::size_t c = 0; c < r.size(); ++c)
      values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = r[c];
  }
  return {PricePanel(std::move(kept), std::move(labels), std::move(values)), std::move(gaps)};
}

/// Writes the panel in the same delimited layout load_panel reads.
inline void write_panel(std::ostream& out, const PricePanel& panel, char delim = ',',
                        const std::string& year_column = "year") {
  out << detail::quote_field(year_column, delim);
  for (const auto& l : panel.locations()) out << delim << detail::quote_field(l, delim);
  out << '\n';
  for (Eigen::Index t = 0; t < panel.rows(); ++t) {
    out << panel.years()[static_cast<std::size_t>(t)];
    for (Eigen::Index c = 0; c < panel.cols(); ++c)
      out << delim << detail::fmt_num(panel.values()(t, c));
    out << '\n';
  }
}

/// Per-location clipping bounds for winsorization at fraction p.
///
/// With k = floor(n * p), the lower bound is the (k+1)-th smallest value and
/// the upper bound the (k+1)-th largest, so exactly the k most extreme
/// observations on each side are pulled in. Bounds are order statistics,
/// which makes winsorization idempotent.
inline std::pair<double, double> winsor_bounds(std::vector<double> column, double p) {
  std::sort(column.begin(), column.end());
  const auto n = column.size();
  const auto k = std::min(static_cast<std::size_t>(std::floor(static_cast<double>(n) * p)),
                          (n - 1) / 2);
  return {column[k], column[n - 1 - k]};
}

/// Clips each location column to its winsorization bounds.
/// Appends a warning for columns shorter than ceil(1/p), where nothing is clipped.
inline PricePanel winsorize(const PricePanel& panel, double p,
                            std::vector<std::string>* warnings = nullptr) {
  if (!(p > 0.0 && p < 0.5))
    throw ConfigError("winsorization fraction must lie in (0, 0.5), got " + detail::fmt_num(p));
  Eigen::MatrixXd out = panel.values();
  const auto n = static_cast<std::size_t>(panel.rows());
  if (warnings && static_cast<double>(n) < std::ceil(1.0 / p))
    warnings->push_back("winsorize: " + std::to_string(n) + " observations per location is below " +
                        detail::fmt_num(std::ceil(1.0 / p)) + "; no values are clipped");
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    std::vector<double> col(out.col(c).data(), out.col(c).data() + out.rows());
    const auto [lo, hi] = winsor_bounds(std::move(col), p);
    out.col(c) = out.col(c).cwiseMax(lo).cwiseMin(hi);
  }
  auto lineage = panel.lineage();
  lineage.push_back({TransformKind::winsorized, p});
  return {panel.years(), panel.locations(), std::move(out), std::move(lineage)};
}

/// Row t of the result is value(t+1) - value(t), labeled with the later year.
inline PricePanel first_difference(const PricePanel& panel) {
  if (panel.rows() < 2) throw DataError("first difference needs at least 2 years");
  const auto n = panel.rows() - 1;
  Eigen::MatrixXd d = panel.values().bottomRows(n) - panel.values().topRows(n);
  std::vector<int> years(panel.years().begin() + 1, panel.years().end());
  auto lineage = panel.lineage();
  lineage.push_back({TransformKind::first_differenced, 0.0});
  return {std::move(years), panel.locations(), std::move(d), std::move(lineage)};
}

/// Pearson correlation between every pair of location columns.
inline Eigen::MatrixXd pearson_correlation_matrix(const PricePanel& panel) {
  if (panel.rows() < 2) throw DataError("correlation needs at least 2 observations");
  const Eigen::MatrixXd centered = panel.values().rowwise() - panel.values().colwise().mean();
  Eigen::VectorXd sd(centered.cols());
  for (Eigen::Index c = 0; c < centered.cols(); ++c) {
    sd(c) = centered.col(c).norm();
    if (!(sd(c) > 0.0))
      throw DataError("zero-variance column '" +
                      panel.locations()[static_cast<std::size_t>(c)] + "'");
  }
  Eigen::MatrixXd r = centered.transpose() * centered;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      r(i, j) = std::clamp(r(i, j) / (sd(i) * sd(j)), -1.0, 1.0);
    r(i, i) = 1.0;
  }
  return (r + r.transpose()) / 2.0;
}

/// Cross-location mean level per year.
inline Eigen::VectorXd row_means(const PricePanel& panel) {
  return panel.values().rowwise().mean();
}

}  // namespace dysp
