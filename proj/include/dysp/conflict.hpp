#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"

namespace dysp {

struct ConflictEvent {
  std::string id;
  std::string name;
  int region_code = 0;
  int start_year = 0;
  int end_year = 0;
  double fatalities = 0.0;
};

/// Column names in the catalog source. Empty id/name columns are optional.
struct CatalogSchema {
  char delimiter = ',';
  std::string id = "id";
  std::string name = "name";
  std::string region = "region";
  std::string start = "start_year";
  std::string end = "end_year";
  std::string fatalities = "fatalities";
};

struct CatalogLoad {
  std::vector<ConflictEvent> events;
  int dropped_missing_fatalities = 0;
  int rejected_missing_end = 0;
  std::vector<std::string> report;  // one line per dropped or rejected row
};

inline CatalogLoad parse_catalog(std::istream& in, const CatalogSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("catalog source is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_row(line, schema.delimiter);
  const auto column = [&](const std::string& name, bool required) -> long {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw DataError("catalog is missing column '" + name + "'");
      return -1;
    }
    return static_cast<long>(it - header.begin());
  };
  const long c_id = column(schema.id, false), c_name = column(schema.name, false);
  const long c_region = column(schema.region, true), c_start = column(schema.start, true),
             c_end = column(schema.end, true), c_fat = column(schema.fatalities, true);

  CatalogLoad out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_row(line, schema.delimiter);
    if (f.size() != header.size())
      throw DataError("catalog row " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    const auto at = [&](long c) { return f[static_cast<std::size_t>(c)]; };
    const std::string row = "catalog row " + std::to_string(lineno);
    ConflictEvent e;
    e.id = c_id >= 0 ? at(c_id) : std::to_string(lineno);
    e.name = c_name >= 0 ? at(c_name) : std::string{};
    long long v = 0;
    if (!detail::parse_int(at(c_region), v)) throw DataError(row + ": malformed region code '" + at(c_region) + "'");
    e.region_code = static_cast<int>(v);
    if (!detail::parse_int(at(c_start), v)) throw DataError(row + ": malformed start year '" + at(c_start) + "'");
    e.start_year = static_cast<int>(v);
    if (at(c_fat).empty()) {
      ++out.dropped_missing_fatalities;
      out.report.push_back(row + ": missing fatalities, dropped");
      continue;
    }
    if (at(c_end).empty()) {
      ++out.rejected_missing_end;
      out.report.push_back(row + ": missing end year, rejected");
      continue;
    }
    if (!detail::parse_int(at(c_end), v)) throw DataError(row + ": malformed end year '" + at(c_end) + "'");
    e.end_year = static_cast<int>(v);
    if (e.end_year < e.start_year)
      throw DataError(row + ": end year " + std::to_string(e.end_year) + " precedes start year " +
                      std::to_string(e.start_year));
    if (!detail::parse_double(at(c_fat), e.fatalities) || e.fatalities < 0.0)
      throw DataError(row + ": malformed fatality count '" + at(c_fat) + "'");
    out.events.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ConflictEvent> filter_regions(const std::vector<ConflictEvent>& events,
                                                 const std::set<int>& codes) {
  std::vector<ConflictEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [&](const ConflictEvent& e) { return codes.count(e.region_code) > 0; });
  return out;
}

/// Fatalities per calendar year over a contiguous year range.
struct FatalitySeries {
  int first_year = 0;
  std::vector<double> values;

  [[nodiscard]] int last_year() const { return first_year + static_cast<int>(values.size()) - 1; }
  [[nodiscard]] double at(int year) const {
    if (year < first_year || year > last_year()) return 0.0;
    return values[static_cast<std::size_t>(year - first_year)];
  }
};

/// Spreads each event's fatalities evenly over its inclusive year span and
/// sums overlapping contributions. The range runs from the earliest start to
/// the latest end; uncovered years are 0.
inline FatalitySeries fatalities_per_year(const std::vector<ConflictEvent>& events) {
  if (events.empty()) throw DataError("no conflict events to allocate");
  int lo = events.front().start_year, hi = events.front().end_year;
  for (const auto& e : events) {
    if (e.end_year < e.start_year) throw DataError("event '" + e.id + "' ends before it starts");
    lo = std::min(lo, e.start_year);
    hi = std::max(hi, e.end_year);
  }
  FatalitySeries s;
  s.first_year = lo;
  s.values.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (const auto& e : events) {
    const double per_year = e.fatalities / static_cast<double>(e.end_year - e.start_year + 1);
    for (int y = e.start_year; y <= e.end_year; ++y) s.values[static_cast<std::size_t>(y - lo)] += per_year;
  }
  return s;
}

/// ceil(start + (end - start) / 2) in exact integer arithmetic.
inline int conflict_midpoint(int start, int end) {
  if (end < start) throw DataError("conflict ends before it starts");
  return start + (end - start + 1) / 2;
}

inline void write_fatality_series(std::ostream& out, const FatalitySeries& s, char delim = ',') {
  out << "year" << delim << "fatalities\n";
  for (std::size_t k = 0; k < s.values.size(); ++k)
    out << s.first_year + static_cast<int>(k) << delim << detail::fmt_num(s.values[k]) << '\n';
}

}  // namespace dysp
