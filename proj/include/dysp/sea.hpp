#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dysp/conflict.hpp"
#include "dysp/detail/util.hpp"
#include "dysp/error.hpp"
#include "dysp/year_series.hpp"

namespace dysp {

enum class EpochNormalization {
  standardize,  // subtract the epoch mean, divide by the epoch standard deviation
  none
};

enum class BandSides { two_sided, one_sided_upper };

struct EpochSpec {
  std::vector<int> events;
  int window = 5;  // lags -window..+window
  EpochNormalization normalization = EpochNormalization::standardize;
  int n_boot = 10000;
  std::uint64_t seed = 1;
  BandSides sides = BandSides::two_sided;
  unsigned workers = 1;
};

/// Significance levels of the reported bands, widest band last.
inline constexpr std::array<double, 3> sea_levels = {0.10, 0.05, 0.01};

struct SeaBand {
  double lo = 0.0;
  double hi = 0.0;
};

struct SeaResult {
  std::vector<int> lags;
  std::vector<double> composite;
  std::array<std::vector<SeaBand>, 3> bands;  // indexed like sea_levels
  std::vector<bool> significant_05;
  std::vector<int> used_events;
  std::vector<std::string> warnings;

  [[nodiscard]] bool significant_at(std::size_t level, std::size_t lag_index, BandSides sides) const {
    const auto& b = bands[level][lag_index];
    const double c = composite[lag_index];
    return c > b.hi || (sides == BandSides::two_sided && c < b.lo);
  }
};

namespace detail {

/// Years whose full epoch window is present in the series.
inline std::vector<int> valid_epoch_years(const YearSeries& s, int w) {
  std::vector<int> out;
  for (int y : s.years) {
    bool ok = true;
    for (int l = -w; l <= w && ok; ++l) ok = s.at(y + l).has_value();
    if (ok) out.push_back(y);
  }
  return out;
}

/// Normalized epoch, or nullopt when its variance is zero.
inline std::optional<std::vector<double>> epoch(const YearSeries& s, int year, int w, EpochNormalization norm) {
  std::vector<double> v;
  for (int l = -w; l <= w; ++l) v.push_back(*s.at(year + l));
  if (norm == EpochNormalization::none) return v;
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  const double sd = stddev(v);
  if (!(sd > 0.0)) return std::nullopt;
  for (double& x : v) x = (x - mean) / sd;
  return v;
}

inline std::vector<double> composite(const YearSeries& s, const std::vector<int>& years, int w,
                                     EpochNormalization norm, std::vector<int>* dropped = nullptr) {
  std::vector<double> acc(static_cast<std::size_t>(2 * w + 1), 0.0);
  int used = 0;
  for (int y : years) {
    const auto e = epoch(s, y, w, norm);
    if (!e) {
      if (dropped) dropped->push_back(y);
      continue;
    }
    for (std::size_t l = 0; l < acc.size(); ++l) acc[l] += (*e)[l];
    ++used;
  }
  if (used > 0)
    for (double& a : acc) a /= used;
  return acc;
}

}  // namespace detail

/// Superposed epoch analysis with a randomized-event bootstrap null.
///
/// Events whose window leaves the series (or hits a missing value) are
/// dropped with a warning, as are zero-variance epochs. The null places the
/// same number of pseudo-events uniformly without replacement over the years
/// with a complete window.
inline SeaResult superposed_epoch(const YearSeries& series, const EpochSpec& spec) {
  if (spec.window < 0) throw ConfigError("epoch half-width must be nonnegative");
  if (spec.n_boot < 100) throw ConfigError("SEA needs at least 100 bootstrap resamples");
  const int w = spec.window;
  SeaResult res;
  for (int l = -w; l <= w; ++l) res.lags.push_back(l);
  const auto domain = detail::valid_epoch_years(series, w);
  const std::set<int> valid(domain.begin(), domain.end());
  for (int y : std::set<int>(spec.events.begin(), spec.events.end())) {
    if (valid.count(y)) res.used_events.push_back(y);
    else res.warnings.push_back("event " + std::to_string(y) + " is too close to the series boundary; dropped");
  }
  if (res.used_events.empty()) throw DataError("no usable SEA events after boundary clipping");
  if (domain.size() < res.used_events.size()) throw DataError("series too short for the SEA null model");

  std::vector<int> dropped;
  res.composite = detail::composite(series, res.used_events, w, spec.normalization, &dropped);
  for (int y : dropped) res.warnings.push_back("event " + std::to_string(y) + " has a zero-variance epoch; dropped");

  const auto k = res.used_events.size();
  std::vector<std::vector<double>> null(static_cast<std::size_t>(spec.n_boot));
  detail::parallel_for(null.size(), spec.workers, [&](std::size_t b) {
    auto rng = detail::stream_rng(spec.seed, b);
    std::vector<int> pool = domain;
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
    null[b] = detail::composite(series, pool, w, spec.normalization);
  });

  const auto nl = res.lags.size();
  for (auto& band : res.bands) band.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    std::vector<double> v;
    v.reserve(null.size());
    for (const auto& c : null) v.push_back(c[l]);
    std::sort(v.begin(), v.end());
    for (std::size_t a = 0; a < sea_levels.size(); ++a) {
      const double alpha = sea_levels[a];
      const double tail = spec.sides == BandSides::two_sided ? alpha / 2.0 : alpha;
      res.bands[a][l] = {detail::quantile_type7(v, tail), detail::quantile_type7(v, 1.0 - tail)};
    }
  }
  for (std::size_t l = 0; l < nl; ++l) res.significant_05.push_back(res.significant_at(1, l, spec.sides));
  return res;
}

enum class EventVariant { start, full_period, midpoint };

inline EventVariant parse_event_variant(const std::string& s) {
  if (s == "start") return EventVariant::start;
  if (s == "full" || s == "full-period" || s == "all") return EventVariant::full_period;
  if (s == "midpoint") return EventVariant::midpoint;
  throw ConfigError("unknown SEA variant '" + s + "' (expected start, full-period or midpoint)");
}

inline std::string to_string(EventVariant v) {
  switch (v) {
    case EventVariant::start: return "start";
    case EventVariant::full_period: return "full-period";
    case EventVariant::midpoint: return "midpoint";
  }
  return "?";
}

/// Event years for a set of conflict spans. Exclusions apply to every
/// variant; in practice they only bite for the full-period set.
inline std::vector<int> event_sets(const std::vector<YearRange>& conflicts, EventVariant variant,
                                   const std::vector<YearRange>& exclusions = {}) {
  std::set<int> years;
  for (const auto& c : conflicts) {
    switch (variant) {
      case EventVariant::start: years.insert(c.first); break;
      case EventVariant::midpoint: years.insert(conflict_midpoint(c.first, c.last)); break;
      case EventVariant::full_period:
        for (int y = c.first; y <= c.last; ++y) years.insert(y);
        break;
    }
  }
  std::vector<int> out;
  for (int y : years)
    if (!in_any(exclusions, y)) out.push_back(y);
  return out;
}

inline void write_sea_result(std::ostream& out, const SeaResult& r, char delim = ',') {
  out << "lag" << delim << "composite" << delim << "band10_lo" << delim << "band10_hi" << delim << "band05_lo"
      << delim << "band05_hi" << delim << "band01_lo" << delim << "band01_hi" << delim << "significant_at_05\n";
  for (std::size_t l = 0; l < r.lags.size(); ++l) {
    out << r.lags[l] << delim << detail::fmt_num(r.composite[l]);
    for (const auto& band : r.bands) out << delim << detail::fmt_num(band[l].lo) << delim << detail::fmt_num(band[l].hi);
    out << delim << (r.significant_05[l] ? "true" : "false") << '\n';
  }
}

}  // namespace dysp
