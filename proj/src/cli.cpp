#include "ssiv/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <boost/version.hpp>
#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssiv/config.hpp"
#include "ssiv/diagnostics.hpp"
#include "ssiv/error.hpp"
#include "ssiv/ingest.hpp"
#include "ssiv/pipeline.hpp"
#include "ssiv/simulate.hpp"

namespace ssiv::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string to_hex(const unsigned char* data, unsigned len) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += digits[data[i] >> 4];
    out += digits[data[i] & 0xf];
  }
  return out;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return to_hex(md, len);
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

namespace {

enum class LogLevel { quiet, info, debug };

struct Run {
  Run(std::ostream& o, std::ostream& e) : out(o), err(e) {}

  std::ostream& out;
  std::ostream& err;
  std::string command;
  std::vector<std::string> arguments;
  fs::path out_dir;
  ReportFormat format = ReportFormat::text;
  LogLevel log = LogLevel::info;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void info(const std::string& msg) const {
    if (log != LogLevel::quiet) err << "ssiv: " << msg << '\n';
  }

  std::string input(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("input file does not exist: " + path);
    inputs.push_back(path);
    return path;
  }

  std::string extension() const {
    switch (format) {
      case ReportFormat::json: return ".json";
      case ReportFormat::csv: return ".csv";
      case ReportFormat::text: break;
    }
    return ".txt";
  }

  /// Writes `content` to out_dir/name and records it for the manifest.
  void write(const std::string& name, const std::string& content) {
    fs::create_directories(out_dir);
    const fs::path p = out_dir / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + p.string());
    f << content;
    if (!f) throw ValidationError("write failed: " + p.string());
    outputs.push_back(name);
  }

  void write_manifest() {
    nlohmann::ordered_json m;
    m["tool"] = "ssiv";
    m["version"] = kVersion;
    m["command"] = command;
    m["arguments"] = arguments;
    m["config"] = config;
    m["inputs"] = nlohmann::ordered_json::array();
    for (const auto& p : inputs) {
      m["inputs"].push_back({{"path", p}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
    }
    m["outputs"] = nlohmann::ordered_json::array();
    for (const auto& name : outputs) {
      m["outputs"].push_back({{"path", name}, {"sha256", sha256_file((out_dir / name).string())}});
    }
    m["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)},
                     {"boost", std::to_string(BOOST_VERSION / 100000) + "." +
                                   std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                                   std::to_string(BOOST_VERSION % 100)},
                     {"compiler", __VERSION__}};
    fs::create_directories(out_dir);
    std::ofstream f(out_dir / "manifest.json", std::ios::binary);
    f << m.dump(2) << '\n';
  }

  /// Writes a report to the output directory and echoes it on stdout.
  void emit(const std::string& stem, const std::string& content) {
    write(stem + extension(), content);
    out << content;
  }
};

nlohmann::ordered_json echo(const KeyValueConfig& kv) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

std::string panel_csv(const PanelDataset& p) {
  std::ostringstream os;
  write_panel_csv(os, p);
  return os.str();
}

std::string shocks_csv(const ShockSeries& s) {
  std::ostringstream os;
  write_shocks_csv(os, s);
  return os.str();
}

// ---- subcommand options ----

struct IngestArgs {
  std::string trade, conflicts, prices, macro, roster, deflator;
  int first_year = 2000, last_year = 2020, share_lag = 3;
};

struct EstimateArgs {
  std::string spec, data, shares, shocks;
  std::vector<int> lags;
};

struct DiagnoseArgs {
  std::string shocks, shares, data, trade, split = std::string(col::mineral_trade), industries;
  bool residualize = false;
  int year = 2000;
  std::size_t top = 10;
};

struct SimulateArgs {
  std::string config;
  int reps = 500;
  unsigned threads = 0;
  std::string vcov = "robust";
  int falsification_lag = 0;
  bool exposure_se = false;
  bool dataset = false;
  std::optional<std::uint64_t> seed;
};

PreparedData load_prepared(Run& run, const EstimateArgs& a, EstimationSpec& spec) {
  const KeyValueConfig kv = KeyValueConfig::parse_file(run.input(a.spec));
  run.config = echo(kv);
  spec = read_estimation_spec(kv);
  PanelDataset panel = read_panel_csv_file(run.input(a.data));
  std::optional<SharePanel> shares;
  std::optional<ShockSeries> shocks;
  if (!a.shares.empty()) shares = shares_from_panel(read_panel_csv_file(run.input(a.shares)), spec.share_lag);
  if (!a.shocks.empty()) shocks = read_shocks_csv_file(run.input(a.shocks));
  PreparedData d = prepare(spec, std::move(panel), std::move(shares), std::move(shocks));
  if (d.missing_shock_terms > 0) {
    run.info(std::to_string(d.missing_shock_terms) + " share-weighted terms had no shock value");
  }
  return d;
}

void cmd_ingest(Run& run, const IngestArgs& a) {
  const Roster roster = read_roster_file(run.input(a.roster));
  TradeData trade = load_trade_file(run.input(a.trade), roster);
  if (!a.deflator.empty()) {
    std::ifstream in(run.input(a.deflator));
    apply_deflator(trade, load_deflator(in, a.deflator));
  }
  const auto conflicts = load_conflicts_file(run.input(a.conflicts));
  const auto prices = load_prices_file(run.input(a.prices));
  const auto macro = load_macro_file(run.input(a.macro));
  run.config = {{"first_year", a.first_year}, {"last_year", a.last_year}, {"share_lag", a.share_lag}};

  BuiltPanel built = build_panel(trade, conflicts, prices, macro, roster, YearWindow{a.first_year, a.last_year});
  const SharePanel shares = compute_shares(built.panel, trade.roster, a.share_lag);
  const PanelDataset panel = built.panel.with_column("share_total", compute_incomplete_control(shares).values);
  const ShockSeries shocks = importance_weights(shares, built.shocks);

  run.write("panel.csv", panel_csv(panel));
  run.write("shares.csv", panel_csv(shares_as_panel(shares)));
  run.write("shocks.csv", shocks_csv(shocks));
  std::ostringstream report;
  write_join_report(report, built.dropped);
  run.write("join_report.jsonl", report.str());
  run.info("panel: " + std::to_string(panel.rows()) + " cells, " + std::to_string(built.dropped.size()) +
           " dropped, " + std::to_string(built.price_gaps) + " industry-periods without a unit value");
}

void cmd_estimate(Run& run, const EstimateArgs& a) {
  EstimationSpec spec;
  const PreparedData d = load_prepared(run, a, spec);
  std::vector<LabeledEstimate> cols;
  cols.push_back({"SSIV", run_iv(d)});
  if (spec.report_ols) cols.push_back({"OLS", run_ols(d)});
  std::ostringstream os;
  write_estimates(os, cols, run.format);
  run.emit("estimate", os.str());
}

void cmd_falsify(Run& run, const EstimateArgs& a) {
  EstimationSpec spec;
  const PreparedData d = load_prepared(run, a, spec);
  std::vector<int> lags = a.lags.empty() ? spec.falsify_lags : a.lags;
  if (lags.empty()) lags = {1, 2};
  std::vector<LabeledEstimate> cols;
  for (int lag : lags) {
    if (lag < 1) throw ValidationError("falsification lags must be >= 1");
    cols.push_back({"t-" + std::to_string(lag), run_iv(d, lag)});
  }
  std::ostringstream os;
  write_estimates(os, cols, run.format);
  run.emit("falsify", os.str());
}

void cmd_equivalence(Run& run, const EstimateArgs& a) {
  EstimationSpec spec;
  const PreparedData d = load_prepared(run, a, spec);
  const EquivalenceReport r = equivalence_check(d);
  std::ostringstream os;
  write_equivalence(os, r, run.format);
  run.emit("equivalence", os.str());
  if (r.max_relative_gap > 1e-8) {
    throw EstimationError("location-level and shock-level estimates disagree (relative gap " +
                          std::to_string(r.max_relative_gap) + ")");
  }
}

void cmd_diagnose_shocks(Run& run, const DiagnoseArgs& a) {
  ShockSeries shocks = read_shocks_csv_file(run.input(a.shocks));
  if (!a.shares.empty()) {
    shocks = importance_weights(shares_from_panel(read_panel_csv_file(run.input(a.shares)), 0), std::move(shocks));
  }
  run.config = {{"residualize_period", a.residualize}, {"industries", a.industries}};
  std::optional<std::vector<IndustryId>> filter;
  if (!a.industries.empty()) {
    std::set<IndustryId> all;
    for (const auto& [key, entry] : shocks.entries()) all.insert(key.industry);
    SharePanel index;
    index.industries.assign(all.begin(), all.end());
    filter = resolve_industry_set(a.industries, index);
  }
  const ShockSummary s = filter ? shock_summary(shocks, a.residualize, std::span<const IndustryId>(*filter))
                                : shock_summary(shocks, a.residualize);
  std::ostringstream os;
  write_report(os, s, run.format);
  run.emit("shock_summary", os.str());
}

void cmd_diagnose_outcomes(Run& run, const DiagnoseArgs& a) {
  const PanelDataset panel = read_panel_csv_file(run.input(a.data));
  run.config = {{"split", a.split}};
  std::ostringstream os;
  write_report(os, outcome_summary(panel, a.split), run.format);
  run.emit("outcome_summary", os.str());
}

void cmd_diagnose_concentration(Run& run, const DiagnoseArgs& a) {
  const TradeData trade = load_trade_file(run.input(a.trade), Roster{});
  run.config = {{"year", a.year}, {"top", a.top}};
  std::ostringstream os;
  write_report(os, exporter_concentration(trade.world, a.year, a.top), run.format);
  run.emit("concentration", os.str());
}

void cmd_simulate(Run& run, const SimulateArgs& a) {
  const KeyValueConfig kv = KeyValueConfig::parse_file(run.input(a.config));
  DGPConfig cfg = read_dgp_config(kv);
  kv.reject_unused();
  if (a.seed) cfg.seed = *a.seed;
  run.config = echo(kv);
  run.config["seed"] = cfg.seed;

  if (a.dataset) {
    const SyntheticData data = generate(cfg);
    run.write("panel.csv", panel_csv(data.panel));
    run.write("shares.csv", panel_csv(shares_as_panel(data.shares)));
    run.write("shocks.csv", shocks_csv(data.shocks));
    nlohmann::ordered_json truth;
    truth["beta"] = data.truth.beta;
    truth["seed"] = data.truth.seed;
    truth["industry_sets"] = nlohmann::ordered_json::array();
    for (const auto& set : data.truth.industry_sets) {
      std::vector<std::string> codes;
      for (const auto& k : set) codes.push_back(k.code());
      truth["industry_sets"].push_back(codes);
    }
    run.write("truth.json", truth.dump(2) + "\n");
    run.info("wrote synthetic panel with " + std::to_string(data.panel.rows()) + " cells");
    return;
  }

  if (run.format == ReportFormat::csv) throw ValidationError("simulate reports are text or json");
  MCOptions o;
  o.reps = a.reps;
  o.threads = a.threads;
  o.vcov = parse_vcov_kind(a.vcov);
  o.falsification_lag = a.falsification_lag;
  o.exposure_se = a.exposure_se;
  run.config["reps"] = a.reps;
  run.config["vcov"] = a.vcov;
  run.config["falsification_lag"] = a.falsification_lag;
  const MCReport r = monte_carlo(cfg, o);
  std::ostringstream os;
  if (run.format == ReportFormat::json) {
    write_mc_report_json(os, r);
  } else {
    write_mc_report_text(os, r);
  }
  run.emit("mc_report", os.str());
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shift-share IV estimation for mineral trade and conflict", "ssiv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string out_dir;
  std::string format = "text";
  std::string log_level = "info";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-o,--out", out_dir, "Output directory (default: $SSIV_OUTPUT_DIR or .)");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json", "csv"}));
    sub->add_option("--log-level", log_level, "quiet, info or debug")->check(CLI::IsMember({"quiet", "info", "debug"}));
  };

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Build the location-period panel, shares and shocks from raw CSVs");
  ingest->add_option("--trade", ia.trade, "exporter,hs2,year,export_usd")->required();
  ingest->add_option("--conflicts", ia.conflicts, "country,year,events,fatalities")->required();
  ingest->add_option("--prices", ia.prices, "hs2,year,unit_value_usd")->required();
  ingest->add_option("--macro", ia.macro, "country,year,gdp_usd,unemployment_pct")->required();
  ingest->add_option("--roster", ia.roster, "Country codes in the estimation sample")->required();
  ingest->add_option("--deflator", ia.deflator, "year,factor");
  ingest->add_option("--first-year", ia.first_year);
  ingest->add_option("--last-year", ia.last_year);
  ingest->add_option("--share-lag", ia.share_lag)->check(CLI::NonNegativeNumber);
  add_common(ingest);

  EstimateArgs ea;
  auto add_estimation_inputs = [&](CLI::App* sub) {
    sub->add_option("--spec", ea.spec, "Estimation file (key = value)")->required();
    sub->add_option("--data", ea.data, "Panel CSV")->required();
    sub->add_option("--shares", ea.shares, "Share panel CSV");
    sub->add_option("--shocks", ea.shocks, "Shocks CSV");
    add_common(sub);
  };
  auto* estimate = app.add_subcommand("estimate", "Run an estimation file");
  add_estimation_inputs(estimate);
  auto* falsify = app.add_subcommand("falsify", "Re-estimate with the outcome read at earlier periods");
  add_estimation_inputs(falsify);
  falsify->add_option("--lags", ea.lags, "Outcome lags (default: spec falsify_lags, else 1 2)");
  auto* equivalence = app.add_subcommand("equivalence-check", "Compare location-level and shock-level estimates");
  add_estimation_inputs(equivalence);

  DiagnoseArgs da;
  auto* diagnose = app.add_subcommand("diagnose", "Descriptive diagnostics");
  diagnose->require_subcommand(1);
  auto* d_shocks = diagnose->add_subcommand("shocks", "Weighted shock summary and effective number of shocks");
  d_shocks->add_option("--shocks", da.shocks, "Shocks CSV")->required();
  d_shocks->add_option("--shares", da.shares, "Recompute importance weights from this share panel");
  d_shocks->add_flag("--residualize-period", da.residualize, "Residualize shocks on period fixed effects");
  d_shocks->add_option("--industries", da.industries, "minerals, nonminerals, all, hsNN or hs:NN:NN");
  add_common(d_shocks);
  auto* d_outcomes = diagnose->add_subcommand("outcomes", "Conflict outcomes split at the median of a column");
  d_outcomes->add_option("--data", da.data, "Panel CSV")->required();
  d_outcomes->add_option("--split", da.split, "Column to split on");
  add_common(d_outcomes);
  auto* d_conc = diagnose->add_subcommand("concentration", "Top mineral exporters in a year");
  d_conc->add_option("--trade", da.trade, "World trade CSV")->required();
  d_conc->add_option("--year", da.year);
  d_conc->add_option("--top", da.top)->check(CLI::PositiveNumber);
  add_common(d_conc);

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo over a synthetic data-generating process");
  simulate->add_option("--config", sa.config, "DGP config (key = value)")->required();
  simulate->add_option("--reps", sa.reps)->check(CLI::Range(2, 1000000));
  simulate->add_option("--threads", sa.threads);
  simulate->add_option("--vcov", sa.vcov)->check(CLI::IsMember({"classical", "robust", "cluster", "exposure"}));
  simulate->add_option("--falsification-lag", sa.falsification_lag)->check(CLI::NonNegativeNumber);
  simulate->add_flag("--exposure-se", sa.exposure_se, "Also compute exposure-robust standard errors");
  simulate->add_flag("--dataset", sa.dataset, "Write one synthetic dataset instead of running replications");
  simulate->add_option("--seed", sa.seed, "Override the config seed");
  add_common(simulate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  Run run(out, err);
  for (int i = 1; i < argc; ++i) run.arguments.emplace_back(argv[i]);
  if (out_dir.empty()) {
    const char* env = std::getenv("SSIV_OUTPUT_DIR");
    out_dir = env && *env ? env : ".";
  }
  run.out_dir = out_dir;
  run.log = log_level == "quiet" ? LogLevel::quiet : log_level == "debug" ? LogLevel::debug : LogLevel::info;

  try {
    run.format = parse_report_format(format);
    if (ingest->parsed()) {
      run.command = "ingest";
      cmd_ingest(run, ia);
    } else if (estimate->parsed()) {
      run.command = "estimate";
      cmd_estimate(run, ea);
    } else if (falsify->parsed()) {
      run.command = "falsify";
      cmd_falsify(run, ea);
    } else if (equivalence->parsed()) {
      run.command = "equivalence-check";
      cmd_equivalence(run, ea);
    } else if (d_shocks->parsed()) {
      run.command = "diagnose shocks";
      cmd_diagnose_shocks(run, da);
    } else if (d_outcomes->parsed()) {
      run.command = "diagnose outcomes";
      cmd_diagnose_outcomes(run, da);
    } else if (d_conc->parsed()) {
      run.command = "diagnose concentration";
      cmd_diagnose_concentration(run, da);
    } else if (simulate->parsed()) {
      run.command = "simulate";
      cmd_simulate(run, sa);
    }
    run.write_manifest();
  } catch (const EstimationError& e) {
    err << "estimation failed: " << e.what() << '\n';
    run.write_manifest();
    return kExitEstimation;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace ssiv::cli
