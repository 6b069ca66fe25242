#pragma once

// End-to-end run: ingest -> winsorize -> difference -> adf -> spillover ->
// rolling -> network -> conflicts -> regression -> sea, writing every stage
// output into one run directory described by manifest.json.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/version.hpp>
#include <Eigen/Core>

#include "json.hpp"

#include "dysp/adf.hpp"
#include "dysp/config.hpp"
#include "dysp/conflict.hpp"
#include "dysp/error.hpp"
#include "dysp/fevd.hpp"
#include "dysp/network.hpp"
#include "dysp/panel.hpp"
#include "dysp/quantreg.hpp"
#include "dysp/regression.hpp"
#include "dysp/sea.hpp"
#include "dysp/spillover.hpp"
#include "dysp/var.hpp"

namespace dysp {

inline constexpr const char* tool_version = "0.1.0";

/// Process exit status for an error type: 2 config, 3 data, 4 numerical.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  return 4;
}

// ---- shared preparation -------------------------------------------------------

struct PreparedPanel {
  PricePanel raw;
  PricePanel levels;   // after winsorization
  PricePanel returns;  // after differencing (equal to levels when disabled)
  std::vector<std::string> warnings;
};

inline PricePanel read_panel_file(const RunConfig& c, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(c.panel, std::ios::binary);
  if (!in) throw ConfigError("cannot open panel file '" + c.panel + "'");
  auto load = load_panel(in, c.panel_schema());
  if (warnings)
    for (const auto& g : load.gaps)
      warnings->push_back("panel: years " + std::to_string(g.after + 1) + "-" + std::to_string(g.before - 1) +
                          " are missing");
  return std::move(load.panel);
}

inline PreparedPanel prepare_panel(PricePanel raw, const RunConfig& c, std::vector<std::string> warnings = {}) {
  PricePanel levels = c.winsorize > 0.0 ? winsorize(raw, c.winsorize, &warnings) : raw;
  PricePanel returns = c.difference ? first_difference(levels) : levels;
  return {std::move(raw), std::move(levels), std::move(returns), std::move(warnings)};
}

/// Lag order for the full-sample and rolling fits.
inline int chosen_order(const PricePanel& returns, const RunConfig& c, OrderSelection* sel = nullptr) {
  if (!c.order.automatic) return c.order.p;
  VarOptions vo;
  vo.intercept = c.intercept;
  auto s = select_order(returns, c.max_order, c.order.criterion, vo);
  if (sel) *sel = s;
  return s.chosen;
}

/// Seeds derive from the master seed per use, so a subcommand run with the
/// same configuration reproduces the matching pipeline output.
inline QuantileOptions quantile_options_for(const RunConfig& c, std::size_t sample, std::size_t q) {
  QuantileOptions qo;
  qo.bootstrap = c.bootstrap;
  qo.seed = detail::splitmix64(c.seed ^ (0x100 + 16 * sample + q));
  qo.workers = c.workers;
  return qo;
}

inline EpochSpec sea_spec_for(const RunConfig& c, EventVariant variant) {
  EpochSpec spec;
  spec.events = event_sets(c.sea_conflicts, variant, c.sea_exclusions);
  spec.window = c.sea_window;
  spec.normalization = c.sea_normalization;
  spec.n_boot = c.sea_n_boot;
  spec.seed = detail::splitmix64(c.seed ^ (0x200 + static_cast<std::uint64_t>(variant)));
  spec.sides = c.sea_sides;
  spec.workers = c.workers;
  if (spec.events.empty()) throw ConfigError("SEA " + to_string(variant) + ": no events configured");
  return spec;
}

/// Rolling index averaged over the configured windows.
inline AveragedIndex spillover_index(const PricePanel& returns, const RunConfig& c,
                                     std::vector<RollingSpillover>* runs = nullptr) {
  return average_over_windows(returns, c.windows, c.spillover_options(chosen_order(returns, c)), runs);
}

/// The CPI control aligned to calendar years (see CpiControl).
inline YearSeries cpi_control_series(const PricePanel& levels, CpiControl mode, int window) {
  const Eigen::VectorXd m = row_means(levels);
  YearSeries s;
  s.years = levels.years();
  for (Eigen::Index t = 0; t < m.size(); ++t) {
    if (mode == CpiControl::year) {
      s.values.emplace_back(m(t));
    } else if (t + 1 >= window) {
      s.values.emplace_back(m.segment(t + 1 - window, window).mean());
    } else {
      s.values.emplace_back(std::nullopt);
    }
  }
  return s;
}

inline FatalitySeries read_fatalities(const RunConfig& c, CatalogLoad* load_out = nullptr) {
  std::ifstream in(c.catalog, std::ios::binary);
  if (!in) throw ConfigError("cannot open catalog file '" + c.catalog + "'");
  auto load = parse_catalog(in, c.catalog_schema);
  const auto events = filter_regions(load.events, c.regions);
  if (events.empty()) throw DataError("no catalog events in the configured regions");
  auto series = fatalities_per_year(events);
  if (load_out) *load_out = std::move(load);
  return series;
}

/// Table averaged over every window length whose fit ends in `year`.
inline std::optional<SpilloverTable> snapshot_table(const std::vector<RollingSpillover>& runs, int year,
                                                    const std::vector<std::string>& labels) {
  std::optional<FevdMatrix> acc;
  int count = 0;
  for (const auto& r : runs) {
    for (std::size_t k = 0; k < r.end_years.size(); ++k) {
      if (r.end_years[k] != year || !r.tables[k]) continue;
      const auto& f = r.tables[k]->fevd;
      if (!acc) {
        acc = f;
        acc->d = f.d / 100.0;
      } else {
        acc->d += f.d / 100.0;
      }
      ++count;
    }
  }
  if (!acc) return std::nullopt;
  acc->d /= count;
  return spillover_table(*acc, labels);
}

/// Index years nearest to each target (ties to the earlier year), deduplicated.
inline std::vector<int> resolve_snapshot_years(const AveragedIndex& idx, const std::vector<int>& targets) {
  std::vector<int> present;
  for (std::size_t k = 0; k < idx.years.size(); ++k)
    if (idx.value[k]) present.push_back(idx.years[k]);
  std::vector<int> out;
  if (present.empty()) return out;
  for (int t : targets) {
    int best = present.front();
    for (int y : present)
      if (std::abs(y - t) < std::abs(best - t)) best = y;
    if (std::find(out.begin(), out.end(), best) == out.end()) out.push_back(best);
  }
  return out;
}

// ---- run directory ------------------------------------------------------------

/// Output directory that records the name and hash of everything written.
class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path dir) : dir_(std::move(dir)) {
    namespace fs = std::filesystem;
    if (fs::exists(dir_)) {
      if (!fs::is_directory(dir_)) throw ConfigError("output path '" + dir_.string() + "' is not a directory");
      clear_previous_run();
    }
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + (dir_ / name).string() + "'");
    out << content;
    if (!out) throw DataError("failed writing '" + (dir_ / name).string() + "'");
    files_[name] = {content.size(), detail::hex64(detail::fnv1a64(content))};
  }

  template <class F>
  void write_with(const std::string& name, F&& fill) {
    std::ostringstream os;
    fill(os);
    write(name, os.str());
  }

  struct FileRecord {
    std::size_t bytes = 0;
    std::string hash;
  };
  [[nodiscard]] const std::map<std::string, FileRecord>& files() const { return files_; }
  [[nodiscard]] const std::filesystem::path& path() const { return dir_; }

 private:
  // A directory holding a previous manifest is reused after removing the
  // files that manifest lists; anything else in it is left alone and refused.
  void clear_previous_run() {
    namespace fs = std::filesystem;
    const auto manifest = dir_ / "manifest.json";
    if (fs::exists(manifest)) {
      std::ifstream in(manifest);
      nlohmann::ordered_json m;
      try {
        m = nlohmann::ordered_json::parse(in);
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("output directory '" + dir_.string() + "' holds an unreadable manifest");
      }
      if (m.contains("files"))
        for (const auto& f : m["files"]) fs::remove(dir_ / f.at("name").get<std::string>());
      fs::remove(manifest);
    }
    if (!fs::is_empty(dir_))
      throw ConfigError("output directory '" + dir_.string() + "' contains files from outside a previous run");
  }

  std::filesystem::path dir_;
  std::map<std::string, FileRecord> files_;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return detail::hex64(detail::fnv1a64(os.str()));
}

struct PipelineOutcome {
  int exit_code = 0;
  std::string failed_stage;
  std::string message;
  std::filesystem::path directory;
  std::string outputs_digest;
  std::vector<std::string> warnings;
};

/// Runs every stage into cfg.output. On failure the stage name and cause go
/// to a FAILED file next to whatever was already written, and the manifest
/// is still produced.
inline PipelineOutcome run_pipeline(const RunConfig& cfg, std::ostream* log = nullptr) {
  PipelineOutcome outcome;
  try {
    validate_config(cfg);
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.failed_stage = "config";
    outcome.message = e.what();
    return outcome;
  }

  const std::string started = utc_timestamp();
  std::optional<RunDirectory> run;
  try {
    run.emplace(cfg.output);
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.failed_stage = "config";
    outcome.message = e.what();
    return outcome;
  }
  outcome.directory = run->path();

  struct StageRecord {
    std::string name;
    std::string status;
  };
  std::vector<StageRecord> stages;
  std::string current;
  std::vector<std::string>& warnings = outcome.warnings;
  const auto begin = [&](const std::string& name) {
    current = name;
    if (log) *log << "[" << name << "]\n";
  };
  const auto done = [&](const char* status = "ok") { stages.push_back({current, status}); };
  const auto delim = cfg.delimiter;

  try {
    begin("ingest");
    PricePanel raw = read_panel_file(cfg, &warnings);
    if (const auto issue = check_dimensions(cfg, static_cast<int>(raw.cols()), static_cast<int>(raw.rows()))) {
      current = issue->stage;
      throw ConfigError(issue->message);
    }
    run->write_with("panel.csv", [&](std::ostream& o) { write_panel(o, raw, delim, cfg.year_column); });
    run->write_with("correlation.csv", [&](std::ostream& o) {
      const Eigen::MatrixXd r = pearson_correlation_matrix(raw);
      o << "location";
      for (const auto& l : raw.locations()) o << ',' << detail::quote_field(l, ',');
      o << '\n';
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        o << detail::quote_field(raw.locations()[static_cast<std::size_t>(i)], ',');
        for (Eigen::Index j = 0; j < r.cols(); ++j) o << ',' << detail::fmt_num(r(i, j));
        o << '\n';
      }
    });
    done();

    begin("winsorize");
    const auto prepared = prepare_panel(std::move(raw), cfg, warnings);
    warnings = prepared.warnings;
    if (cfg.winsorize > 0.0) {
      run->write_with("winsorized.csv", [&](std::ostream& o) { write_panel(o, prepared.levels, delim, cfg.year_column); });
      done();
    } else {
      done("skipped");
    }

    begin("difference");
    if (cfg.difference) {
      run->write_with("returns.csv", [&](std::ostream& o) { write_panel(o, prepared.returns, delim, cfg.year_column); });
      done();
    } else {
      done("skipped");
    }
    const PricePanel& returns = prepared.returns;

    begin("adf");
    run->write_with("adf.csv", [&](std::ostream& o) {
      write_adf_table(o, adf_by_location(returns, cfg.adf_lag, cfg.adf_form));
    });
    done();

    begin("spillover");
    OrderSelection selection;
    const int p = chosen_order(returns, cfg, &selection);
    if (cfg.order.automatic) {
      run->write_with("order_selection.csv", [&](std::ostream& o) {
        o << "p," << to_string(selection.criterion) << ",chosen\n";
        for (std::size_t k = 0; k < selection.scores.size(); ++k)
          o << k + 1 << ',' << detail::fmt_num(selection.scores[k]) << ','
            << (static_cast<int>(k + 1) == selection.chosen ? "true" : "false") << '\n';
      });
    }
    const SpilloverOptions sopt = cfg.spillover_options(p);
    for (int w : cfg.windows)
      check_window(w, static_cast<int>(returns.cols()), static_cast<int>(returns.rows()), sopt);
    const VarModel model = fit_var(returns, p, sopt.var);
    const auto stability = stability_check(model);
    if (!stability.stable)
      warnings.push_back("full-sample VAR is not stable (spectral radius " +
                         detail::fmt_num(stability.spectral_radius) + ")");
    run->write("var_model.json", var_model_to_json(model).dump(2) + "\n");
    FevdMatrix shares = fevd(model, cfg.horizon, cfg.method);
    if (cfg.normalize && cfg.method != FevdMethod::cholesky) shares = normalize_rows_to_target(shares);
    const SpilloverTable full = spillover_table(shares, returns.locations());
    run->write_with("spillover_full.csv", [&](std::ostream& o) { write_spillover_table(o, full); });
    run->write("spillover_full.json", spillover_table_to_json(full).dump(2) + "\n");
    done();

    begin("rolling");
    std::vector<RollingSpillover> runs;
    const AveragedIndex index = average_over_windows(returns, cfg.windows, sopt, &runs);
    for (const auto& r : runs) {
      const std::string w = std::to_string(r.window);
      run->write_with("rolling_index_w" + w + ".csv", [&](std::ostream& o) { write_rolling_index(o, r); });
      run->write_with("rolling_net_w" + w + ".csv",
                      [&](std::ostream& o) { write_rolling_net(o, r, returns.locations()); });
      for (std::size_t k = 0; k < r.failures.size(); ++k)
        if (!r.failures[k].empty())
          warnings.push_back("window " + w + " ending " + std::to_string(r.end_years[k]) + ": " + r.failures[k]);
    }
    run->write_with("spillover_index.csv", [&](std::ostream& o) { write_index_series(o, index); });
    const YearSeries index_series = to_year_series(index);
    done();

    begin("network");
    CoordinateMap coords;
    if (!cfg.coords.empty()) {
      std::ifstream in(cfg.coords, std::ios::binary);
      coords = load_coordinates(in);
    }
    const auto years = resolve_snapshot_years(
        index, cfg.snapshot_years.empty() ? default_snapshot_targets() : cfg.snapshot_years);
    for (int y : years) {
      const auto table = snapshot_table(runs, y, returns.locations());
      if (!table) continue;
      const auto graph = apply_threshold(to_graph(*table, cfg.coords.empty() ? nullptr : &coords, &warnings),
                                         cfg.threshold);
      run->write_with("spillover_" + std::to_string(y) + ".csv",
                      [&](std::ostream& o) { write_spillover_table(o, *table); });
      run->write("network_" + std::to_string(y) + "." + file_extension(cfg.network_format),
                 export_graph(graph, cfg.network_format));
    }
    done();

    std::optional<FatalitySeries> fatalities;
    begin("conflicts");
    if (!cfg.catalog.empty()) {
      CatalogLoad load;
      fatalities = read_fatalities(cfg, &load);
      run->write_with("catalog_report.txt", [&](std::ostream& o) {
        o << "events kept: " << load.events.size() << '\n'
          << "dropped (missing fatalities): " << load.dropped_missing_fatalities << '\n'
          << "rejected (missing end year): " << load.rejected_missing_end << '\n';
        for (const auto& line : load.report) o << line << '\n';
      });
      run->write_with("fatalities.csv", [&](std::ostream& o) { write_fatality_series(o, *fatalities); });
      done();
    } else {
      done("skipped");
    }

    begin("regression");
    if (fatalities) {
      const auto cpi = cpi_control_series(prepared.levels, cfg.cpi_control, cfg.windows.front());
      const std::vector<std::pair<std::string, std::vector<YearRange>>> samples = {
          {"full", {}}, {"excl", cfg.exclusions}};
      std::vector<RegressionFit> ols;
      nlohmann::ordered_json doc;
      doc["nw_lag"] = cfg.nw_lag < 0 ? nlohmann::ordered_json("auto") : nlohmann::ordered_json(cfg.nw_lag);
      doc["cpi_control"] = cfg.cpi_control == CpiControl::year ? "year" : "window";
      nlohmann::ordered_json scatter;
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& [name, excl] = samples[s];
        const auto design = build_design(index_series, *fatalities, cpi, excl);
        run->write_with("design_" + name + ".csv", [&](std::ostream& o) {
          o << "year,spillover,log_fatalities,cpi\n";
          for (Eigen::Index i = 0; i < design.n(); ++i)
            o << design.years[static_cast<std::size_t>(i)] << ',' << detail::fmt_num(design.y(i)) << ','
              << detail::fmt_num(design.X(i, 1)) << ',' << detail::fmt_num(design.X(i, 2)) << '\n';
        });
        ols.push_back(ols_newey_west(design, cfg.nw_lag));
        std::vector<RegressionFit> qfits;
        for (std::size_t q = 0; q < cfg.quantiles.size(); ++q) {
          qfits.push_back(quantile_fit(design, cfg.quantiles[q], quantile_options_for(cfg, s, q)));
        }
        run->write_with("quantile_" + name + ".csv", [&](std::ostream& o) { write_quantile_profile(o, qfits, 1); });
        auto& block = doc[name];
        block["n"] = design.n();
        block["ols"] = regression_to_json(ols.back());
        for (const auto& f : qfits) block["quantile"].push_back(regression_to_json(f));

        nlohmann::ordered_json sc;
        sc["linear"] = scatter_to_json(scatter_fit_summary(design.X.col(1), design.y, CurveMode::linear));
        try {
          sc["spline"] =
              scatter_to_json(scatter_fit_summary(design.X.col(1), design.y, CurveMode::restricted_cubic_spline));
        } catch (const std::exception& e) {
          sc["spline"] = {{"error", e.what()}};
        }
        scatter[name] = sc;
      }
      run->write_with("regression_ols.csv", [&](std::ostream& o) {
        write_regression_table(o, ols, {"Full sample", "Excluding exclusions"});
      });
      run->write("regression.json", doc.dump(2) + "\n");
      run->write("scatter.json", scatter.dump(2) + "\n");
      done();
    } else {
      done("skipped");
    }

    begin("sea");
    for (int v = 0; v < 3; ++v) {
      const auto variant = static_cast<EventVariant>(v);
      const auto res = superposed_epoch(index_series, sea_spec_for(cfg, variant));
      for (const auto& w : res.warnings) warnings.push_back("sea " + to_string(variant) + ": " + w);
      std::string file = to_string(variant);
      std::replace(file.begin(), file.end(), '-', '_');
      run->write_with("sea_" + file + ".csv", [&](std::ostream& o) { write_sea_result(o, res); });
    }
    done();
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.failed_stage = current;
    outcome.message = e.what();
    stages.push_back({current, "failed"});
  }

  nlohmann::ordered_json manifest;
  try {
    if (outcome.exit_code != 0)
      run->write("FAILED", "stage: " + outcome.failed_stage + "\nerror: " + outcome.message + "\n");
    std::string wtext;
    for (const auto& w : warnings) wtext += w + "\n";
    run->write("warnings.txt", wtext);
    {
      std::string effective;
      for (const auto& [k, v] : config_entries(cfg)) {
        if (k == "output" || k == "workers") continue;
        const bool path = k == "panel" || k == "catalog" || k == "coords";
        effective += k + " = " + (path && !v.empty() ? std::filesystem::path(v).filename().string() : v) + "\n";
      }
      run->write("config.effective", effective);
    }

    manifest["format"] = "dysp.manifest";
    manifest["version"] = 1;
    manifest["tool_version"] = tool_version;
    manifest["config_hash"] = config_hash(cfg);
    manifest["seed"] = cfg.seed;
    manifest["started_at"] = started;
    manifest["finished_at"] = utc_timestamp();
    manifest["status"] = outcome.exit_code == 0 ? "ok" : "failed";
    if (outcome.exit_code != 0)
      manifest["error"] = {{"stage", outcome.failed_stage}, {"message", outcome.message}, {"exit_code", outcome.exit_code}};
    auto st = nlohmann::ordered_json::array();
    for (const auto& s : stages) st.push_back({{"name", s.name}, {"status", s.status}});
    manifest["stages"] = st;
    auto inputs = nlohmann::ordered_json::array();
    for (const auto& [role, path] : {std::pair<std::string, std::string>{"panel", cfg.panel},
                                     {"catalog", cfg.catalog},
                                     {"coords", cfg.coords}})
      if (!path.empty())
        inputs.push_back({{"role", role},
                          {"name", std::filesystem::path(path).filename().string()},
                          {"fnv1a64", file_hash(path)}});
    manifest["inputs"] = inputs;
    auto files = nlohmann::ordered_json::array();
    for (const auto& [name, rec] : run->files())
      files.push_back({{"name", name}, {"bytes", rec.bytes}, {"fnv1a64", rec.hash}});
    manifest["files"] = files;
    manifest["environment"] = {{"compiler", __VERSION__},
                               {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                             std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                             std::to_string(EIGEN_MINOR_VERSION)},
                               {"boost", BOOST_LIB_VERSION}};
    // everything except the timestamps
    nlohmann::ordered_json stable = manifest;
    stable.erase("started_at");
    stable.erase("finished_at");
    outcome.outputs_digest = detail::hex64(detail::fnv1a64(stable.dump()));
    manifest["outputs_digest"] = outcome.outputs_digest;

    std::ofstream out(run->path() / "manifest.json", std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw DataError("cannot write manifest");
  } catch (const std::exception& e) {
    if (outcome.exit_code == 0) {
      outcome.exit_code = exit_code_for(e);
      outcome.failed_stage = "manifest";
      outcome.message = e.what();
    }
  }
  return outcome;
}

}  // namespace dysp
