// dysp: spillover analysis of multi-location price panels.
//
// Every subcommand reads the same key = value configuration (--config) and
// accepts --set key=value overrides; the named flags are shorthands for
// individual keys. Flags win over --set, which wins over the file.

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "dysp/config.hpp"
#include "dysp/pipeline.hpp"

namespace {

using dysp::RunConfig;

struct Settings {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;
  std::string out;

  RunConfig build() const {
    RunConfig c = config_file.empty() ? RunConfig{} : dysp::load_config_file(config_file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw dysp::ConfigError("--set expects key=value, got '" + s + "'");
      dysp::set_option(c, dysp::detail::trim(s.substr(0, eq)), s.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) dysp::set_option(c, k, v);
    return c;
  }
};

/// Sends output to --out when given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw dysp::ConfigError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void key_option(CLI::App* app, Settings& s, const std::string& flag, const std::string& key,
                const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&s, key](const std::string& v) { s.flags.emplace_back(key, v); }, help + " [" + key + "]");
}

void key_flag(CLI::App* app, Settings& s, const std::string& flag, const std::string& key,
              const std::string& value, const std::string& help) {
  app->add_flag_callback(flag, [&s, key, value] { s.flags.emplace_back(key, value); },
                         help + " [" + key + " = " + value + "]");
}

void common(CLI::App* app, Settings& s, bool with_out = true) {
  app->add_option("-c,--config", s.config_file, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
  app->add_option("--set", s.sets, "Override one configuration key, as key=value (repeatable)");
  key_option(app, s, "--seed", "seed", "Master seed");
  key_option(app, s, "--workers", "workers", "Worker threads");
  if (with_out) app->add_option("-o,--out", s.out, "Output file (default: standard output)");
}

void panel_options(CLI::App* app, Settings& s) {
  key_option(app, s, "--panel", "panel", "Price panel file");
  key_option(app, s, "--delimiter", "delimiter", "Field delimiter: a character, comma, semicolon or tab");
  key_option(app, s, "--year-column", "year_column", "Name of the year column");
  key_option(app, s, "--gap-policy", "gap_policy", "strict or lenient handling of missing years");
  key_option(app, s, "--winsorize", "winsorize", "Winsorization fraction per tail, 0 to disable");
  key_flag(app, s, "--no-difference", "difference", "false", "Analyse levels instead of first differences");
}

void model_options(CLI::App* app, Settings& s) {
  key_option(app, s, "--order", "order", "VAR order, or auto(aic|bic|hq)");
  key_option(app, s, "--max-order", "max_order", "Largest order considered by auto");
  key_option(app, s, "--horizon", "horizon", "Forecast horizon H");
  key_option(app, s, "--method", "method", "FEVD method: generalized, cholesky or generalized-literal");
  key_flag(app, s, "--no-normalize", "normalize", "false", "Keep raw generalized shares (audit output)");
  key_option(app, s, "--covariance", "covariance", "Residual covariance denominator: dof or ml");
}

void index_options(CLI::App* app, Settings& s, std::string& index_file) {
  app->add_option("--index", index_file, "Spillover index file (year,value[,n_windows]); computed from the panel when omitted")
      ->check(CLI::ExistingFile);
  key_option(app, s, "--windows", "windows", "Rolling window lengths, e.g. 30-40 or 30,35,40");
}

void regression_options(CLI::App* app, Settings& s) {
  key_option(app, s, "--catalog", "catalog", "Conflict catalog file");
  key_option(app, s, "--regions", "regions", "Region codes kept from the catalog, e.g. 3,4");
  key_option(app, s, "--cpi-control", "cpi_control", "CPI control: year or window");
}

dysp::PreparedPanel load_prepared(const RunConfig& c, bool echo_warnings = true) {
  if (c.panel.empty()) throw dysp::ConfigError("no panel file given (use --panel or the panel key)");
  std::vector<std::string> warnings;
  auto raw = dysp::read_panel_file(c, &warnings);
  auto prepared = dysp::prepare_panel(std::move(raw), c, std::move(warnings));
  if (echo_warnings)
    for (const auto& w : prepared.warnings) std::cerr << "warning: " << w << '\n';
  return prepared;
}

dysp::YearSeries load_index(const RunConfig& c, const std::string& index_file, const dysp::PricePanel* returns) {
  if (!index_file.empty()) {
    std::ifstream in(index_file, std::ios::binary);
    return dysp::read_index_series(in);
  }
  if (!returns) throw dysp::ConfigError("no spillover index given (use --index or --panel)");
  return dysp::to_year_series(dysp::spillover_index(*returns, c));
}

std::vector<dysp::YearRange> exclusion_ranges(const RunConfig& c, bool excluded) {
  return excluded ? c.exclusions : std::vector<dysp::YearRange>{};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spillover analysis of multi-location price panels"};
  app.set_version_flag("--version", std::string("dysp ") + dysp::tool_version);
  app.require_subcommand(1);

  // pipeline ----------------------------------------------------------------
  Settings pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "Run every stage into a run directory with a manifest");
  common(c_pipe, pipe, false);
  key_option(c_pipe, pipe, "--output", "output", "Run directory");
  key_option(c_pipe, pipe, "--panel", "panel", "Price panel file");
  key_option(c_pipe, pipe, "--catalog", "catalog", "Conflict catalog file");
  key_option(c_pipe, pipe, "--coords", "coords", "Coordinates file (label, lat, lon)");

  // ingest ------------------------------------------------------------------
  Settings ing;
  std::string ing_stage = "returns";
  bool ing_corr = false;
  auto* c_ing = app.add_subcommand("ingest", "Load, winsorize and difference a panel");
  common(c_ing, ing);
  panel_options(c_ing, ing);
  c_ing->add_option("--stage", ing_stage, "Panel to write: raw, winsorized or returns")
      ->check(CLI::IsMember({"raw", "winsorized", "returns"}));
  c_ing->add_flag("--correlation", ing_corr, "Write the correlation matrix of the selected panel instead");

  // adf ---------------------------------------------------------------------
  Settings adf;
  auto* c_adf = app.add_subcommand("adf", "Augmented Dickey-Fuller table by location");
  common(c_adf, adf);
  panel_options(c_adf, adf);
  key_option(c_adf, adf, "--lag", "adf.lag", "Lagged differences in the test regression");
  key_option(c_adf, adf, "--form", "adf.form", "Deterministic terms: none, constant or trend");

  // spillover ---------------------------------------------------------------
  Settings spl;
  int spl_window = 0, spl_end = 0;
  std::string spl_format = "csv";
  auto* c_spl = app.add_subcommand("spillover", "Spillover table for the full sample or one window");
  common(c_spl, spl);
  panel_options(c_spl, spl);
  model_options(c_spl, spl);
  c_spl->add_option("--window", spl_window, "Use only this many trailing years")->check(CLI::PositiveNumber);
  c_spl->add_option("--end-year", spl_end, "Last year of the window (default: last year of the panel)");
  c_spl->add_option("--format", spl_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // rolling -----------------------------------------------------------------
  Settings rol;
  std::string rol_net;
  auto* c_rol = app.add_subcommand("rolling", "Rolling spillover index averaged over window lengths");
  common(c_rol, rol);
  panel_options(c_rol, rol);
  model_options(c_rol, rol);
  key_option(c_rol, rol, "--windows", "windows", "Window lengths, e.g. 30-40 or 30,35,40");
  c_rol->add_option("--net-out", rol_net, "Also write per-location net spillover for the shortest window");

  // network -----------------------------------------------------------------
  Settings net;
  std::string net_table;
  int net_window = 0, net_end = 0;
  bool net_recompute = false;
  auto* c_net = app.add_subcommand("network", "Directed spillover graph as DOT, GraphML or JSON");
  common(c_net, net);
  panel_options(c_net, net);
  model_options(c_net, net);
  c_net->add_option("--table", net_table, "Spillover table JSON (from spillover --format json)")
      ->check(CLI::ExistingFile);
  c_net->add_option("--window", net_window, "Window length when computing from the panel")
      ->check(CLI::PositiveNumber);
  c_net->add_option("--end-year", net_end, "Last year of that window");
  key_option(c_net, net, "--retain", "network.retain", "Drop edges with weight at or below this");
  key_option(c_net, net, "--highlight", "network.highlight", "Emphasize edges above this");
  key_option(c_net, net, "--format", "network.format", "dot, graphml or json");
  key_option(c_net, net, "--coords", "coords", "Coordinates file (label, lat, lon)");
  c_net->add_flag("--recompute-nodes", net_recompute, "Rebuild node attributes from the retained edges");

  // regress -----------------------------------------------------------------
  Settings reg;
  std::string reg_index;
  bool reg_json = false;
  auto* c_reg = app.add_subcommand("regress", "OLS with Newey-West errors: spillover on log fatalities and CPI");
  common(c_reg, reg);
  panel_options(c_reg, reg);
  model_options(c_reg, reg);
  index_options(c_reg, reg, reg_index);
  regression_options(c_reg, reg);
  key_option(c_reg, reg, "--exclude", "exclusions", "Year ranges dropped in the second column, e.g. 1628-1648");
  key_option(c_reg, reg, "--nw-lag", "nw_lag", "Newey-West lag, or auto");
  c_reg->add_flag("--json", reg_json, "Write JSON instead of the table");

  // quantreg ----------------------------------------------------------------
  Settings qr;
  std::string qr_index;
  bool qr_excl = false;
  auto* c_qr = app.add_subcommand("quantreg", "Quantile regressions with bootstrap errors");
  common(c_qr, qr);
  panel_options(c_qr, qr);
  model_options(c_qr, qr);
  index_options(c_qr, qr, qr_index);
  regression_options(c_qr, qr);
  key_option(c_qr, qr, "--exclude", "exclusions", "Year ranges removed with --excluded");
  key_option(c_qr, qr, "--quantiles", "quantiles", "Quantile levels, e.g. 0.25,0.5,0.75,0.9");
  key_option(c_qr, qr, "--bootstrap", "bootstrap", "Bootstrap resamples");
  c_qr->add_flag("--excluded", qr_excl, "Fit on the sample without the exclusion ranges");

  // sea ---------------------------------------------------------------------
  Settings sea;
  std::string sea_index, sea_variant = "midpoint";
  auto* c_sea = app.add_subcommand("sea", "Superposed epoch analysis of the spillover index around conflicts");
  common(c_sea, sea);
  panel_options(c_sea, sea);
  model_options(c_sea, sea);
  index_options(c_sea, sea, sea_index);
  c_sea->add_option("--variant", sea_variant, "Event years: start, full-period or midpoint")
      ->check(CLI::IsMember({"start", "full-period", "midpoint"}));
  key_option(c_sea, sea, "--conflicts", "sea.conflicts", "Conflict spans, e.g. 1618-1648,1756-1762");
  key_option(c_sea, sea, "--exclude", "sea.exclusions", "Years removed from the event set");
  key_option(c_sea, sea, "--window", "sea.window", "Epoch half-width in years");
  key_option(c_sea, sea, "--n-boot", "sea.n_boot", "Bootstrap resamples for the null bands");
  key_option(c_sea, sea, "--sides", "sea.sides", "two-sided or upper");
  key_option(c_sea, sea, "--normalization", "sea.normalization", "standardize or none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_pipe->parsed()) {
      const RunConfig cfg = pipe.build();
      const auto outcome = dysp::run_pipeline(cfg, &std::cerr);
      for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
      if (outcome.exit_code != 0) {
        std::cerr << "dysp: stage '" << outcome.failed_stage << "' failed: " << outcome.message << '\n';
        if (!outcome.directory.empty()) std::cerr << "partial outputs in " << outcome.directory.string() << '\n';
        return outcome.exit_code;
      }
      std::cout << "run directory: " << outcome.directory.string() << '\n'
                << "outputs digest: " << outcome.outputs_digest << '\n';
      return 0;
    }

    if (c_ing->parsed()) {
      const RunConfig cfg = ing.build();
      const auto p = load_prepared(cfg);
      const dysp::PricePanel& chosen = ing_stage == "raw" ? p.raw : ing_stage == "winsorized" ? p.levels : p.returns;
      Sink sink(ing.out);
      if (ing_corr) {
        const Eigen::MatrixXd r = dysp::pearson_correlation_matrix(chosen);
        auto& o = sink.stream();
        o << "location";
        for (const auto& l : chosen.locations()) o << ',' << dysp::detail::quote_field(l, ',');
        o << '\n';
        for (Eigen::Index i = 0; i < r.rows(); ++i) {
          o << dysp::detail::quote_field(chosen.locations()[static_cast<std::size_t>(i)], ',');
          for (Eigen::Index j = 0; j < r.cols(); ++j) o << ',' << dysp::detail::fmt_num(r(i, j));
          o << '\n';
        }
      } else {
        dysp::write_panel(sink.stream(), chosen, cfg.delimiter, cfg.year_column);
      }
      return 0;
    }

    if (c_adf->parsed()) {
      const RunConfig cfg = adf.build();
      const auto p = load_prepared(cfg);
      Sink sink(adf.out);
      dysp::write_adf_table(sink.stream(), dysp::adf_by_location(p.returns, cfg.adf_lag, cfg.adf_form));
      return 0;
    }

    if (c_spl->parsed()) {
      const RunConfig cfg = spl.build();
      const auto p = load_prepared(cfg);
      dysp::PricePanel data = p.returns;
      if (spl_window > 0) {
        const auto& years = data.years();
        const int end = spl_end == 0 ? years.back() : spl_end;
        const auto last = std::find(years.begin(), years.end(), end);
        if (last == years.end()) throw dysp::ConfigError("end year " + std::to_string(end) + " is not in the panel");
        const auto count = static_cast<int>(last - years.begin()) + 1;
        const int p_eff = cfg.order.automatic ? 1 : cfg.order.p;
        dysp::check_window(spl_window, static_cast<int>(data.cols()), count, cfg.spillover_options(p_eff));
        data = data.slice_rows(count - spl_window, spl_window);
      }
      const int order = dysp::chosen_order(data, cfg);
      const auto model = dysp::fit_var(data, order, cfg.spillover_options(order).var);
      auto shares = dysp::fevd(model, cfg.horizon, cfg.method);
      Sink sink(spl.out);
      if (!cfg.normalize && cfg.method != dysp::FevdMethod::cholesky) {
        // audit output: raw shares, row = source, column = target
        auto& o = sink.stream();
        o << "source";
        for (const auto& l : data.locations()) o << ',' << dysp::detail::quote_field(l, ',');
        o << '\n';
        for (Eigen::Index i = 0; i < shares.d.rows(); ++i) {
          o << dysp::detail::quote_field(data.locations()[static_cast<std::size_t>(i)], ',');
          for (Eigen::Index j = 0; j < shares.d.cols(); ++j) o << ',' << dysp::detail::fmt_num(shares.d(i, j));
          o << '\n';
        }
        return 0;
      }
      if (cfg.method != dysp::FevdMethod::cholesky) shares = dysp::normalize_rows_to_target(shares);
      const auto table = dysp::spillover_table(shares, data.locations());
      if (spl_format == "json") sink.stream() << dysp::spillover_table_to_json(table).dump(2) << '\n';
      else dysp::write_spillover_table(sink.stream(), table);
      return 0;
    }

    if (c_rol->parsed()) {
      const RunConfig cfg = rol.build();
      const auto p = load_prepared(cfg);
      std::vector<dysp::RollingSpillover> runs;
      const auto idx = dysp::spillover_index(p.returns, cfg, &runs);
      Sink sink(rol.out);
      dysp::write_index_series(sink.stream(), idx);
      if (!rol_net.empty()) {
        Sink net_sink(rol_net);
        dysp::write_rolling_net(net_sink.stream(), runs.front(), p.returns.locations());
      }
      return 0;
    }

    if (c_net->parsed()) {
      const RunConfig cfg = net.build();
      cfg.threshold.validate();
      std::optional<dysp::SpilloverTable> table;
      if (!net_table.empty()) {
        std::ifstream in(net_table, std::ios::binary);
        table = dysp::spillover_table_from_json(nlohmann::ordered_json::parse(in));
      } else {
        const auto p = load_prepared(cfg);
        dysp::PricePanel data = p.returns;
        if (net_window > 0) {
          const auto& years = data.years();
          const int end = net_end == 0 ? years.back() : net_end;
          const auto last = std::find(years.begin(), years.end(), end);
          if (last == years.end()) throw dysp::ConfigError("end year " + std::to_string(end) + " is not in the panel");
          const auto count = static_cast<int>(last - years.begin()) + 1;
          dysp::check_window(net_window, static_cast<int>(data.cols()), count,
                             cfg.spillover_options(cfg.order.automatic ? 1 : cfg.order.p));
          data = data.slice_rows(count - net_window, net_window);
        }
        table = dysp::spillover_from_panel(data, cfg.spillover_options(dysp::chosen_order(data, cfg)));
      }
      dysp::CoordinateMap coords;
      if (!cfg.coords.empty()) {
        std::ifstream in(cfg.coords, std::ios::binary);
        if (!in) throw dysp::ConfigError("cannot open coordinates file '" + cfg.coords + "'");
        coords = dysp::load_coordinates(in);
      }
      std::vector<std::string> warnings;
      const auto graph = dysp::apply_threshold(
          dysp::to_graph(*table, cfg.coords.empty() ? nullptr : &coords, &warnings), cfg.threshold, net_recompute);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      Sink sink(net.out);
      dysp::export_graph(sink.stream(), graph, cfg.network_format);
      return 0;
    }

    if (c_reg->parsed() || c_qr->parsed()) {
      const bool is_reg = c_reg->parsed();
      const RunConfig cfg = is_reg ? reg.build() : qr.build();
      if (cfg.catalog.empty()) throw dysp::ConfigError("no conflict catalog given (use --catalog)");
      if (cfg.panel.empty()) throw dysp::ConfigError("the CPI control needs the panel (use --panel)");
      const auto p = load_prepared(cfg);
      const auto index = load_index(cfg, is_reg ? reg_index : qr_index, &p.returns);
      const auto fatalities = dysp::read_fatalities(cfg);
      const auto cpi = dysp::cpi_control_series(p.levels, cfg.cpi_control, cfg.windows.front());
      if (is_reg) {
        std::vector<dysp::RegressionFit> fits;
        for (bool excluded : {false, true})
          fits.push_back(dysp::ols_newey_west(
              dysp::build_design(index, fatalities, cpi, exclusion_ranges(cfg, excluded)), cfg.nw_lag));
        Sink sink(reg.out);
        if (reg_json) {
          nlohmann::ordered_json j;
          j["full"] = dysp::regression_to_json(fits[0]);
          j["excl"] = dysp::regression_to_json(fits[1]);
          sink.stream() << j.dump(2) << '\n';
        } else {
          dysp::write_regression_table(sink.stream(), fits, {"Full sample", "Excluding exclusions"});
        }
        return 0;
      }
      const auto design = dysp::build_design(index, fatalities, cpi, exclusion_ranges(cfg, qr_excl));
      std::vector<dysp::RegressionFit> fits;
      for (std::size_t q = 0; q < cfg.quantiles.size(); ++q)
        fits.push_back(dysp::quantile_fit(design, cfg.quantiles[q], dysp::quantile_options_for(cfg, qr_excl ? 1 : 0, q)));
      Sink sink(qr.out);
      dysp::write_quantile_profile(sink.stream(), fits, 1);
      return 0;
    }

    if (c_sea->parsed()) {
      const RunConfig cfg = sea.build();
      std::optional<dysp::PreparedPanel> p;
      if (sea_index.empty()) p = load_prepared(cfg);
      const auto index = load_index(cfg, sea_index, p ? &p->returns : nullptr);
      const auto res = dysp::superposed_epoch(index, dysp::sea_spec_for(cfg, dysp::parse_event_variant(sea_variant)));
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
      Sink sink(sea.out);
      dysp::write_sea_result(sink.stream(), res);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "dysp: error: " << e.what() << '\n';
    return dysp::exit_code_for(e);
  }
  return 0;
}
