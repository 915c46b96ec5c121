#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "ssiv/cli.hpp"
#include "ssiv/panel.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "ssiv");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ssiv::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& body) {
  std::ofstream(p, std::ios::binary) << body;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ssiv_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write_raw(const TempDir& d, bool reversed) {
  std::vector<std::string> trade, conflicts, prices, macro;
  for (int y = 2000; y <= 2006; ++y) {
    const std::string ys = std::to_string(y);
    for (const char* c : {"AGO", "BEN", "CMR"}) {
      trade.push_back(std::string(c) + ",26," + ys + "," + std::to_string(100 + y % 7 * 13 + c[0]));
      trade.push_back(std::string(c) + ",27," + ys + "," + std::to_string(50 + y % 5 * 7));
      trade.push_back(std::string(c) + ",01," + ys + ",3.5");
      macro.push_back(std::string(c) + "," + ys + "," + std::to_string(1000 + y % 3 * 100 + c[1]) + ",7.5");
      if (y % 2 == 0) conflicts.push_back(std::string(c) + "," + ys + ",2,5");
    }
    trade.push_back("USA,27," + ys + ",900");
    for (const char* k : {"01", "26", "27"}) prices.push_back(std::string(k) + "," + ys + "," + std::to_string(1.0 + y % 4));
  }
  auto join = [&](std::string head, std::vector<std::string> rows) {
    if (reversed) std::reverse(rows.begin(), rows.end());
    for (const auto& r : rows) head += r + "\n";
    return head;
  };
  spit(d.path / "trade.csv", join("exporter,hs2,year,export_usd\n", trade));
  spit(d.path / "conflicts.csv", join("country,year,events,fatalities\n", conflicts));
  spit(d.path / "prices.csv", join("hs2,year,unit_value_usd\n", prices));
  spit(d.path / "macro.csv", join("country,year,gdp_usd,unemployment_pct\n", macro));
  spit(d.path / "roster.txt", reversed ? "CMR\nBEN\nAGO\n" : "AGO\nBEN\nCMR\n");
}

std::vector<std::string> ingest_args(const TempDir& d, const std::string& out) {
  return {"ingest", "--trade", d / "trade.csv", "--conflicts", d / "conflicts.csv", "--prices", d / "prices.csv",
          "--macro", d / "macro.csv", "--roster", d / "roster.txt", "-o", out};
}

}  // namespace

TEST_CASE("ingest output does not depend on input row order") {
  TempDir a("ingest_a"), b("ingest_b");
  write_raw(a, false);
  write_raw(b, true);
  REQUIRE(run(ingest_args(a, a / "out")).code == ssiv::cli::kExitOk);
  REQUIRE(run(ingest_args(b, b / "out")).code == ssiv::cli::kExitOk);
  for (const char* f : {"panel.csv", "shares.csv", "shocks.csv", "join_report.jsonl"}) {
    CHECK(slurp(a.path / "out" / f) == slurp(b.path / "out" / f));
  }
  const auto panel = ssiv::read_panel_csv_file(a / "out/panel.csv");
  CHECK(panel.rows() == 21);

  const auto m = nlohmann::json::parse(slurp(a.path / "out" / "manifest.json"));
  CHECK(m["command"] == "ingest");
  CHECK(m["inputs"].size() == 5);
  bool hashed = false;
  for (const auto& o : m["outputs"])
    if (o["path"] == "panel.csv") hashed = o["sha256"] == ssiv::cli::sha256_file(a / "out/panel.csv");
  CHECK(hashed);
  CHECK(m.contains("versions"));
}

TEST_CASE("repeated runs are byte identical") {
  TempDir d("repeat");
  spit(d.path / "dgp.cfg", "n_locations = 20\nn_periods = 8\nindustries = 3\ntrue_beta = 0.1\nnoise = 0.5\nseed = 3\n");
  spit(d.path / "syn.spec",
       "outcome = y\nendogenous = x1\ninstrument_sets = minerals\nshare_control = S\nvcov = exposure\n"
       "report_ols = true\nshare_lag = 0\n");
  REQUIRE(run({"simulate", "--config", d / "dgp.cfg", "--dataset", "-o", d / "data"}).code == 0);
  const std::vector<std::string> est{"estimate", "--spec", d / "syn.spec", "--data", d / "data/panel.csv",
                                     "--shares", d / "data/shares.csv", "--shocks", d / "data/shocks.csv"};
  auto with_out = [](std::vector<std::string> v, std::string o, std::string fmt) {
    v.insert(v.end(), {"-o", o, "--format", fmt});
    return v;
  };
  const Result r1 = run(with_out(est, d / "e1", "json"));
  const Result r2 = run(with_out(est, d / "e2", "json"));
  REQUIRE(r1.code == 0);
  CHECK(r1.out == r2.out);
  CHECK(slurp(d.path / "e1" / "estimate.json") == slurp(d.path / "e2" / "estimate.json"));
  const auto j = nlohmann::json::parse(slurp(d.path / "e1" / "estimate.json"));
  CHECK_FALSE(j.empty());

  std::vector<std::string> eq = est;
  eq[0] = "equivalence-check";
  CHECK(run(with_out(eq, d / "eq", "text")).code == 0);

  std::vector<std::string> fals = est;
  fals[0] = "falsify";
  fals.insert(fals.end(), {"--lags", "1", "2"});
  CHECK(run(with_out(fals, d / "f", "csv")).code == 0);

  const Result mc1 = run({"simulate", "--config", d / "dgp.cfg", "--reps", "6", "--threads", "1", "-o", d / "mc1", "--format", "json"});
  const Result mc2 = run({"simulate", "--config", d / "dgp.cfg", "--reps", "6", "--threads", "3", "-o", d / "mc2", "--format", "json"});
  REQUIRE(mc1.code == 0);
  for (const auto& entry : fs::directory_iterator(d.path / "mc1")) {
    if (entry.path().filename() == "manifest.json") continue;  // records the argument list
    CHECK(slurp(entry.path()) == slurp(d.path / "mc2" / entry.path().filename()));
  }
}

TEST_CASE("exit codes") {
  TempDir d("codes");
  CHECK(run({"estimate", "--bogus"}).code == ssiv::cli::kExitValidation);
  CHECK(run({"estimate", "--spec", d / "missing.spec", "--data", d / "missing.csv", "-o", d / "o"}).code ==
        ssiv::cli::kExitValidation);

  spit(d.path / "bad.cfg", "n_locations = 20\nnoise = -1\n");
  CHECK(run({"simulate", "--config", d / "bad.cfg", "-o", d / "o"}).code == ssiv::cli::kExitValidation);

  spit(d.path / "panel.csv", "location,period,y,x\nAAA,2000,1,2\nAAA,2001,x,3\n");
  spit(d.path / "s.spec", "outcome = y\nendogenous = x\n");
  const Result parse = run({"estimate", "--spec", d / "s.spec", "--data", d / "panel.csv", "-o", d / "o"});
  CHECK(parse.code == ssiv::cli::kExitValidation);
  CHECK(parse.err.find("panel.csv") != std::string::npos);

  // instrument fixed within location: absorbed by the location effects
  spit(d.path / "dgp.cfg", "n_locations = 10\nn_periods = 5\nseed = 1\n");
  REQUIRE(run({"simulate", "--config", d / "dgp.cfg", "--dataset", "-o", d / "data"}).code == 0);
  auto p = ssiv::read_panel_csv_file(d / "data/panel.csv");
  ssiv::RealSeries fixed;
  for (const auto& c : p.cells()) fixed.push_back(static_cast<double>(c.location.code()[2]));
  std::ofstream f(d.path / "fixed.csv", std::ios::binary);
  ssiv::write_panel_csv(f, p.with_column("zf", fixed));
  f.close();
  spit(d.path / "iv.spec", "outcome = y\nendogenous = x1\ninstruments = zf\n");
  CHECK(run({"estimate", "--spec", d / "iv.spec", "--data", d / "fixed.csv", "-o", d / "o"}).code ==
        ssiv::cli::kExitEstimation);
}

TEST_CASE("sha256") {
  CHECK(ssiv::cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
