// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "ssiv/diagnostics.hpp"
#include "ssiv/ingest.hpp"
#include "ssiv/regress.hpp"
#include "ssiv/shocklevel.hpp"
#include "ssiv/simulate.hpp"

using namespace ssiv;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace tol {
constexpr double equivalence = 1e-8;
constexpr double equivalence_seconds = 60.0;
constexpr double oracle = 1e-10;
constexpr std::size_t oracle_max_rows = 200;
constexpr double bias_share = 0.05;
constexpr double coverage_lo = 0.92;
constexpr double coverage_hi = 0.98;
constexpr double min_first_stage_f = 10.0;
constexpr double recovery_seconds = 300.0;
constexpr double ols_worse = 0.95;
constexpr double clustered_coverage = 0.90;
constexpr double ens_target = 23.10;
constexpr double ens = 0.01;
constexpr double largest_target = 0.10;
constexpr double largest = 0.001;
constexpr double ens_equal = 1e-12;  // relative; floating-point "exactly"
constexpr double falsification_lo = 0.05;
constexpr double falsification_hi = 0.15;
constexpr double anticipation_power = 0.5;
constexpr double moments = 1e-8;
}  // namespace tol

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Monte Carlo baseline: planted beta 0.059 on three mineral industries.
DGPConfig baseline() {
  DGPConfig c;
  c.groups = {IndustryGroup{3, 0.059}};
  c.noise = 0.5;
  c.endogeneity = 0.5;
  c.seed = 20240601;
  return c;
}

Outcome equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  DGPConfig c;
  c.n_locations = 25;
  c.n_periods = 12;
  c.groups = {IndustryGroup{3, 0.059}};
  c.noise = 0.5;
  c.endogeneity = 0.5;
  c.missing_cell_prob = 0.1;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    c.seed = rep_seed(777, i);
    const SyntheticData d = generate(c);
    const ResidualizedDesign des = absorb(d.panel, synthetic_spec(c));
    const IVEstimate loc = estimate_2sls(des);
    const IVEstimate shk = estimate_shock_level_iv(to_shock_level(des, d.shares, d.shocks, d.truth.industry_sets));
    worst = std::max(worst, std::abs(shk.beta(0) - loc.beta(0)) / std::abs(loc.beta(0)));
  }
  const double secs = seconds_since(t0);
  return {worst < tol::equivalence && secs < tol::equivalence_seconds,
          fmt("100 panels 25x12, 3 industries: max relative gap %.2e (< %.0e), %.1f s", worst, tol::equivalence, secs)};
}

Outcome oracle_match() {
  double worst = 0.0;
  std::size_t max_rows = 0;
  auto gap = [](const VectorXd& a, const VectorXd& b) {
    return ((a - b).array().abs() / b.array().abs().max(1.0)).maxCoeff();
  };
  for (std::uint64_t i = 0; i < 10; ++i) {
    DGPConfig c;
    c.n_locations = 12 + static_cast<int>(i % 3);
    c.n_periods = 9;
    c.groups = {IndustryGroup{3, 0.2}, IndustryGroup{2, -0.1}};
    c.noise = 0.5;
    c.endogeneity = 0.5;
    c.missing_cell_prob = i % 2 ? 0.1 : 0.0;
    c.seed = 100 + i;
    const SyntheticData d = generate(c);
    const RegressionSpec spec = synthetic_spec(c, VcovKind::classical);
    const ResidualizedDesign des = absorb(d.panel, spec);
    max_rows = std::max(max_rows, des.n());

    std::vector<Cell> cells;
    for (std::size_t r : des.rows) cells.push_back(d.panel.cell(r));
    const MatrixXd fe = oracle::fe_dummies(cells);
    std::map<PeriodId, Eigen::Index> per;
    for (const auto& cell : cells) per.emplace(cell.period, 0);
    Eigen::Index j = 0;
    for (auto& [p, idx] : per) idx = j++;
    const auto n = static_cast<Eigen::Index>(cells.size());
    MatrixXd w(n, j + fe.cols());
    w.setZero();
    VectorXd y(n);
    MatrixXd x(n, 2), z(n, 2);
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::size_t row = des.rows[static_cast<std::size_t>(r)];
      w(r, per.at(cells[static_cast<std::size_t>(r)].period)) = *d.panel.value("S", row);
      y(r) = *d.panel.value("y", row);
      x(r, 0) = *d.panel.value("x1", row);
      x(r, 1) = *d.panel.value("x2", row);
      z(r, 0) = *d.panel.value("z1", row);
      z(r, 1) = *d.panel.value("z2", row);
    }
    w.rightCols(fe.cols()) = fe;

    const IVEstimate iv = estimate_2sls(des);
    const oracle::Fit iv_ref = oracle::iv(x, z, w, y);
    const IVEstimate ols = estimate_ols(des);
    const oracle::Fit ols_ref = oracle::ols(x, w, y);
    worst = std::max({worst, gap(iv.beta, iv_ref.beta), gap(iv.se, iv_ref.se), gap(ols.beta, ols_ref.beta),
                      gap(ols.se, ols_ref.se)});
  }
  return {worst < tol::oracle && max_rows <= tol::oracle_max_rows,
          fmt("10 panels up to %zu rows, 2 endogenous: max coefficient/se gap %.2e (< %.0e)", max_rows, worst,
              tol::oracle)};
}

MCReport baseline_mc() {
  MCOptions o;
  o.reps = 500;
  o.vcov = VcovKind::robust;
  o.check_equivalence = false;
  return monte_carlo(baseline(), o);
}

Outcome recovery(const MCReport& r, double secs) {
  const double beta = r.true_beta[0];
  const bool pass = std::abs(r.mean_bias[0]) < tol::bias_share * std::abs(beta) && r.coverage_95[0] >= tol::coverage_lo &&
                    r.coverage_95[0] <= tol::coverage_hi && r.mean_F[0] > tol::min_first_stage_f &&
                    secs < tol::recovery_seconds && r.failures == 0;
  return {pass, fmt("500 reps, beta %.3f: bias %+.5f (limit %.5f), coverage %.3f in [%.2f, %.2f], mean F %.0f, %.1f s",
                    beta, r.mean_bias[0], tol::bias_share * std::abs(beta), r.coverage_95[0], tol::coverage_lo,
                    tol::coverage_hi, r.mean_F[0], secs)};
}

Outcome endogeneity(const MCReport& r) {
  return {r.ols_worse_share >= tol::ols_worse,
          fmt("OLS mean bias %+.4f vs 2SLS %+.5f; |OLS bias| > |2SLS bias| in %.3f of reps (>= %.2f)",
              r.ols_mean_bias[0], r.mean_bias[0], r.ols_worse_share, tol::ols_worse)};
}

Outcome inference_ordering() {
  DGPConfig c;
  c.groups = {IndustryGroup{36, 0.059}};
  c.shock_process = ShockProcess::industry_cluster;
  c.industry_error_scale = 3.0;
  c.industry_error_persistence = 0.5;
  c.noise = 0.3;
  c.endogeneity = 0.5;
  c.seed = 31337;
  MCOptions o;
  o.reps = 500;
  o.vcov = VcovKind::robust;
  o.exposure_se = true;
  o.check_equivalence = false;
  const MCReport r = monte_carlo(c, o);
  const bool pass = r.mean_se_exposure[0] > r.mean_se_robust[0] && r.coverage_exposure[0] >= tol::clustered_coverage &&
                    r.coverage_robust[0] < tol::clustered_coverage;
  return {pass, fmt("36 industries, shock-loaded errors: mean se clustered %.4f vs robust %.4f (sd of beta %.4f); "
                    "coverage clustered %.3f (>= %.2f), robust %.3f (< %.2f)",
                    r.mean_se_exposure[0], r.mean_se_robust[0], r.sd_beta[0], r.coverage_exposure[0],
                    tol::clustered_coverage, r.coverage_robust[0], tol::clustered_coverage)};
}

// 3 mineral industries x 17 periods; one weight of 0.10 and a geometric tail
// tuned so that 1/HHI = 23.10. Weights are stored unnormalized.
ShockSeries weight_fixture() {
  constexpr int n = 51;
  constexpr double top = 0.10;
  const double target = 1.0 / tol::ens_target - top * top;
  auto tail_ss = [&](double r) {
    std::vector<double> w(n - 1);
    for (int i = 0; i < n - 1; ++i) w[static_cast<std::size_t>(i)] = std::pow(r, i);
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    double ss = 0.0;
    for (double& v : w) ss += std::pow(v * (1.0 - top) / s, 2);
    return ss;
  };
  double lo = 0.5, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (tail_ss(mid) > target ? lo : hi) = mid;
  }
  std::vector<double> w{top};
  double s = 0.0;
  for (int i = 0; i < n - 1; ++i) s += std::pow(lo, i);
  for (int i = 0; i < n - 1; ++i) w.push_back(std::pow(lo, i) * (1.0 - top) / s);

  std::mt19937_64 rng(5);
  std::shuffle(w.begin(), w.end(), rng);
  std::normal_distribution<double> g(0.05, 0.2);
  ShockSeries out;
  std::size_t i = 0;
  for (const char* k : {"25", "26", "27"}) {
    for (int t = 2000; t < 2017; ++t, ++i) {
      out.set_value({IndustryId(k), PeriodId{t}}, g(rng));
      out.set_weight({IndustryId(k), PeriodId{t}}, 0.0371 * w[i]);
    }
  }
  return out;
}

Outcome diagnostics() {
  const ShockSummary s = shock_summary(weight_fixture(), false);
  ShockSeries equal;
  for (const char* k : {"25", "26", "27"}) {
    for (int t = 2000; t < 2017; ++t) {
      equal.set_value({IndustryId(k), PeriodId{t}}, 0.01 * t);
      equal.set_weight({IndustryId(k), PeriodId{t}}, 0.0123);
    }
  }
  const ShockSummary e = shock_summary(equal, false);
  const double k = static_cast<double>(e.n_shocks);
  const bool pass = std::abs(s.effective_shocks - tol::ens_target) <= tol::ens &&
                    std::abs(s.largest_weight - tol::largest_target) <= tol::largest &&
                    std::abs(e.effective_shocks - k) <= tol::ens_equal * k;
  return {pass, fmt("mineral-weight fixture: effective shocks %.4f (%.2f +/- %.2f), largest weight %.4f; "
                    "equal weights: %.12f vs K = %.0f",
                    s.effective_shocks, tol::ens_target, tol::ens, s.largest_weight, e.effective_shocks, k)};
}

Outcome falsification_harness() {
  DGPConfig c = baseline();
  c.first_stage = 3.0;
  c.seed = 4242;
  MCOptions o;
  o.reps = 500;
  o.falsification_lag = 1;
  o.falsification_level = 0.10;
  o.check_equivalence = false;
  const MCReport null = monte_carlo(c, o);
  c.anticipation = 0.5;
  const MCReport alt = monte_carlo(c, o);
  const double r0 = null.rejection_rate_falsification, r1 = alt.rejection_rate_falsification;
  return {r0 >= tol::falsification_lo && r0 <= tol::falsification_hi && r1 > tol::anticipation_power,
          fmt("outcome at t-1, 10%% level, 500 reps: rejection %.3f in [%.2f, %.2f] correctly specified, "
              "%.3f (> %.1f) with anticipation",
              r0, tol::falsification_lo, tol::falsification_hi, r1, tol::anticipation_power)};
}

Outcome moment_system() {
  double worst = 0.0;
  const int panels = 20;
  for (int i = 0; i < panels; ++i) {
    DGPConfig c;
    c.n_locations = 30;
    c.n_periods = 12;
    c.groups = {IndustryGroup{3, 0.059}, IndustryGroup{3, 0.3}, IndustryGroup{3, -0.2}, IndustryGroup{4, 0.1}};
    c.noise = 0.5;
    c.endogeneity = 0.5;
    c.missing_cell_prob = 0.05;
    c.seed = rep_seed(99, static_cast<std::uint64_t>(i));
    const SyntheticData d = generate(c);
    const ResidualizedDesign des = absorb(d.panel, synthetic_spec(c));
    const IVEstimate est = estimate_2sls(des);
    worst = std::max(worst, scaled_moments(des, est.beta).maxCoeff());
  }
  return {worst < tol::moments,
          fmt("4 endogenous regressors, %d panels: max scaled moment %.2e (< %.0e)", panels, worst, tol::moments)};
}

struct RawFixture {
  std::vector<std::string> trade, conflicts, prices, macro;
};

// 10 countries x 10 years x 10 HS2 codes = 1,000 trade rows with cents.
RawFixture raw_fixture() {
  RawFixture f;
  std::mt19937_64 rng(9);
  std::lognormal_distribution<double> value(14.0, 2.0);
  std::uniform_int_distribution<int> events(0, 6);
  const char* countries[] = {"AGO", "BEN", "CMR", "COD", "GHA", "KEN", "MLI", "NGA", "TZA", "ZMB"};
  const char* codes[] = {"25", "26", "27", "01", "09", "52", "61", "71", "84", "87"};
  for (int y = 2000; y < 2010; ++y) {
    for (const char* c : countries) {
      for (const char* k : codes) {
        f.trade.push_back(fmt("%s,%s,%d,%.2f", c, k, y, value(rng)));
      }
      f.macro.push_back(fmt("%s,%d,%.1f,%.2f", c, y, 1e9 * (1.0 + value(rng) / 1e7), 5.0 + y % 7));
      const int e = events(rng);
      if (e > 0) f.conflicts.push_back(fmt("%s,%d,%d,%d", c, y, e, 3 * e));
    }
    for (const char* k : codes) f.prices.push_back(fmt("%s,%d,%.3f", k, y, 1.0 + 0.1 * (y - 2000)));
  }
  return f;
}

std::string ingest_csv(RawFixture f, std::uint64_t shuffle_seed, std::vector<double>* raw_totals = nullptr,
                       PanelDataset* panel_out = nullptr) {
  if (shuffle_seed != 0) {
    std::mt19937_64 rng(shuffle_seed);
    for (auto* rows : {&f.trade, &f.conflicts, &f.prices, &f.macro}) std::shuffle(rows->begin(), rows->end(), rng);
  }
  auto stream = [](const std::string& header, const std::vector<std::string>& rows) {
    std::string s = header + "\n";
    for (const auto& r : rows) s += r + "\n";
    return std::stringstream(s);
  };
  std::set<LocationId> members;
  for (const auto& r : f.macro) members.insert(LocationId(r.substr(0, 3)));
  const Roster roster(members);
  auto ts = stream("exporter,hs2,year,export_usd", f.trade);
  auto cs = stream("country,year,events,fatalities", f.conflicts);
  auto ps = stream("hs2,year,unit_value_usd", f.prices);
  auto ms = stream("country,year,gdp_usd,unemployment_pct", f.macro);
  const BuiltPanel b = build_panel(load_trade(ts, roster), load_conflicts(cs), load_prices(ps), load_macro(ms), roster);
  std::ostringstream out;
  write_panel_csv(out, b.panel);
  if (panel_out) *panel_out = b.panel;
  if (raw_totals) {
    // independent total: long double sum of the raw rows per cell, in file order
    std::map<Cell, long double> acc;
    for (const auto& row : f.trade) {
      const LocationId l(row.substr(0, 3));
      const int y = std::stoi(row.substr(7, 4));
      acc[{l, PeriodId{y}}] += std::stold(row.substr(12));
    }
    for (const auto& cell : b.panel.cells()) raw_totals->push_back(static_cast<double>(acc.at(cell)));
  }
  return out.str();
}

Outcome ingestion() {
  const RawFixture f = raw_fixture();
  std::vector<double> raw;
  PanelDataset panel;
  const std::string reference = ingest_csv(f, 0, &raw, &panel);
  int identical = 0;
  const int shuffles = 5;
  for (int s = 1; s <= shuffles; ++s) identical += ingest_csv(f, static_cast<std::uint64_t>(s)) == reference;

  std::size_t exact = 0;
  double worst_raw = 0.0;
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    const double m = *panel.value(col::mineral_trade, r), n = *panel.value(col::nonmineral_trade, r);
    const double t = *panel.value(col::total_trade, r);
    exact += (m + n == t);
    worst_raw = std::max(worst_raw, std::abs(t - raw[r]) / raw[r]);
  }
  const bool pass = identical == shuffles && exact == panel.rows() && panel.rows() == 100 && worst_raw < 1e-14;
  return {pass, fmt("1,000 trade rows: %d/%d shuffles byte-identical; mineral + non-mineral == total in %zu/%zu cells "
                    "(max gap to raw-row sum %.1e)",
                    identical, shuffles, exact, panel.rows(), worst_raw)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << " " << name << ": " << o.detail << std::endl;
  };

  report(1, "equivalence", equivalence);
  report(2, "oracle", oracle_match);
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<MCReport> mc;
  std::string mc_error;
  try {
    mc = baseline_mc();
  } catch (const std::exception& e) {
    mc_error = e.what();
  }
  const double mc_secs = seconds_since(t0);
  report(3, "recovery", [&] { return mc ? recovery(*mc, mc_secs) : Outcome{false, "threw: " + mc_error}; });
  report(4, "endogeneity", [&] { return mc ? endogeneity(*mc) : Outcome{false, "threw: " + mc_error}; });
  report(5, "inference", inference_ordering);
  report(6, "diagnostics", diagnostics);
  report(7, "falsification", falsification_harness);
  report(8, "moments", moment_system);
  report(9, "ingestion", ingestion);
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures;
}
