#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"

namespace dysp {

/// Inclusive range of calendar years.
struct YearRange {
  int first = 0;
  int last = 0;

  [[nodiscard]] bool contains(int y) const { return y >= first && y <= last; }
  friend bool operator==(const YearRange&, const YearRange&) = default;
};

/// Parses "1628-1648" or a single year "1700".
inline YearRange parse_year_range(const std::string& text) {
  const std::string s = detail::trim(text);
  const auto dash = s.find('-', 1);
  long long a = 0, b = 0;
  if (dash == std::string::npos) {
    if (!detail::parse_int(s, a)) throw ConfigError("malformed year range '" + text + "'");
    b = a;
  } else if (!detail::parse_int(detail::trim(s.substr(0, dash)), a) ||
             !detail::parse_int(detail::trim(s.substr(dash + 1)), b)) {
    throw ConfigError("malformed year range '" + text + "'");
  }
  if (b < a) throw ConfigError("year range '" + text + "' ends before it starts");
  return {static_cast<int>(a), static_cast<int>(b)};
}

inline bool in_any(const std::vector<YearRange>& ranges, int year) {
  for (const auto& r : ranges)
    if (r.contains(year)) return true;
  return false;
}

/// Annual series with possibly missing values, years ascending and unique.
struct YearSeries {
  std::vector<int> years;
  std::vector<std::optional<double>> values;

  [[nodiscard]] std::optional<double> at(int year) const {
    if (years.empty() || year < years.front() || year > years.back()) return std::nullopt;
    // years are usually contiguous; fall back to a scan otherwise
    const auto guess = static_cast<std::size_t>(year - years.front());
    if (guess < years.size() && years[guess] == year) return values[guess];
    for (std::size_t k = 0; k < years.size(); ++k)
      if (years[k] == year) return values[k];
    return std::nullopt;
  }
};

}  // namespace dysp
