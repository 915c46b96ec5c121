#include "ssiv/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"
#include "ssiv/error.hpp"
#include "ssiv/numeric.hpp"
#include "ssiv/shocklevel.hpp"

namespace ssiv {

using Eigen::Index;

std::string_view to_string(ShockProcess p) {
  switch (p) {
    case ShockProcess::iid: return "iid";
    case ShockProcess::period_correlated: return "period";
    case ShockProcess::industry_cluster: return "industry";
  }
  return "?";
}

ShockProcess parse_shock_process(std::string_view s) {
  if (s == "iid") return ShockProcess::iid;
  if (s == "period" || s == "period-correlated") return ShockProcess::period_correlated;
  if (s == "industry" || s == "industry-cluster") return ShockProcess::industry_cluster;
  throw ValidationError("unknown shock process '" + std::string(s) + "'");
}

void DGPConfig::check() const {
  if (n_locations < 2 || n_periods < 2) throw ValidationError("DGP needs at least 2 locations and 2 periods");
  if (n_locations > 26 * 26 * 26) throw ValidationError("too many locations");
  if (groups.empty()) throw ValidationError("DGP needs at least one industry group");
  int k = 0;
  for (const auto& g : groups) {
    if (g.n_industries < 1) throw ValidationError("every industry group needs at least one industry");
    k += g.n_industries;
  }
  if (k > 95) throw ValidationError("at most 95 industries are available");
  if (!(shock_sd > 0.0)) throw ValidationError("degenerate DGP: shocks have zero variance");
  if (share_sigma < 0.0 || share_time_sigma < 0.0 || x_noise < 0.0 || noise < 0.0 || fe_scale < 0.0 ||
      industry_error_scale < 0.0) {
    throw ValidationError("DGP scale parameters must be >= 0");
  }
  auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!unit(shock_correlation) || !unit(industry_error_persistence)) {
    throw ValidationError("correlation parameters must lie in [0, 1]");
  }
  if (!(share_zero_prob >= 0.0 && share_zero_prob < 1.0) || !(missing_cell_prob >= 0.0 && missing_cell_prob < 1.0)) {
    throw ValidationError("probabilities must lie in [0, 1)");
  }
}

DGPConfig read_dgp_config(const KeyValueConfig& kv) {
  DGPConfig c;
  c.n_locations = static_cast<int>(kv.get_int("n_locations", c.n_locations));
  c.n_periods = static_cast<int>(kv.get_int("n_periods", c.n_periods));
  if (kv.has("industries") || kv.has("true_beta")) {
    const auto sizes = kv.get_double_list("industries");
    const auto betas = kv.get_double_list("true_beta");
    if (sizes.size() != betas.size()) throw ValidationError("industries and true_beta need the same length");
    c.groups.clear();
    for (std::size_t i = 0; i < sizes.size(); ++i) c.groups.push_back({static_cast<int>(sizes[i]), betas[i]});
  }
  c.share_mu = kv.get_double("share_mu", c.share_mu);
  c.share_sigma = kv.get_double("share_sigma", c.share_sigma);
  c.share_time_sigma = kv.get_double("share_time_sigma", c.share_time_sigma);
  c.share_zero_prob = kv.get_double("share_zero_prob", c.share_zero_prob);
  c.shock_process = parse_shock_process(kv.get_string("shock_process", std::string(to_string(c.shock_process))));
  c.shock_mean = kv.get_double("shock_mean", c.shock_mean);
  c.shock_sd = kv.get_double("shock_sd", c.shock_sd);
  c.shock_correlation = kv.get_double("shock_correlation", c.shock_correlation);
  c.first_stage = kv.get_double("first_stage", c.first_stage);
  c.share_control_loading = kv.get_double("share_control_loading", c.share_control_loading);
  c.x_noise = kv.get_double("x_noise", c.x_noise);
  c.noise = kv.get_double("noise", c.noise);
  c.endogeneity = kv.get_double("endogeneity", c.endogeneity);
  c.industry_error_scale = kv.get_double("industry_error_scale", c.industry_error_scale);
  c.industry_error_persistence = kv.get_double("industry_error_persistence", c.industry_error_persistence);
  c.anticipation = kv.get_double("anticipation", c.anticipation);
  c.fe_scale = kv.get_double("fe_scale", c.fe_scale);
  c.missing_cell_prob = kv.get_double("missing_cell_prob", c.missing_cell_prob);
  c.seed = kv.get_uint64("seed", c.seed);
  c.check();
  return c;
}

namespace {

std::vector<IndustryId> industry_pool() {
  std::vector<IndustryId> out{IndustryId::from_number(25), IndustryId::from_number(26), IndustryId::from_number(27)};
  for (int c = 1; c <= 99; ++c) {
    if (c == 25 || c == 26 || c == 27 || c == 77) continue;
    out.push_back(IndustryId::from_number(c));
  }
  return out;
}

LocationId location_code(int i) {
  std::string s(3, 'A');
  s[0] = static_cast<char>('A' + i / 676);
  s[1] = static_cast<char>('A' + (i / 26) % 26);
  s[2] = static_cast<char>('A' + i % 26);
  return LocationId(s);
}

std::string numbered(char prefix, std::size_t r) { return std::string(1, prefix) + std::to_string(r + 1); }

}  // namespace

SyntheticData generate(const DGPConfig& cfg) {
  cfg.check();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int L = cfg.n_locations;
  const int T = cfg.n_periods;
  const int T1 = T + 1;  // one extra period feeds anticipation
  const auto R = cfg.groups.size();

  const auto pool = industry_pool();
  std::vector<IndustryId> industries;
  std::vector<std::size_t> group_of;
  Truth truth;
  truth.seed = cfg.seed;
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<IndustryId> set;
    for (int i = 0; i < cfg.groups[r].n_industries; ++i) {
      set.push_back(pool[industries.size()]);
      industries.push_back(set.back());
      group_of.push_back(r);
    }
    std::sort(set.begin(), set.end());
    truth.industry_sets.push_back(set);
    truth.beta.push_back(cfg.groups[r].true_beta);
  }
  const int K = static_cast<int>(industries.size());

  auto draw = [&] { return normal(rng); };

  std::vector<double> fe_y(L), fe_x(L * R), td_y(T), td_x(T * R);
  for (auto& v : fe_y) v = cfg.fe_scale * draw();
  for (auto& v : fe_x) v = cfg.fe_scale * draw();
  for (auto& v : td_y) v = cfg.fe_scale * draw();
  for (auto& v : td_x) v = cfg.fe_scale * draw();

  // shares[l][t][k]
  std::vector<double> base(L * K);
  std::vector<bool> zero(L * K);
  for (int i = 0; i < L * K; ++i) {
    base[i] = cfg.share_mu + cfg.share_sigma * draw();
    zero[i] = unif(rng) < cfg.share_zero_prob;
  }
  std::vector<double> share(static_cast<std::size_t>(L) * T1 * K);
  auto s_at = [&](int l, int t, int k) -> double& { return share[(static_cast<std::size_t>(l) * T1 + t) * K + k]; };
  for (int l = 0; l < L; ++l) {
    for (int t = 0; t < T1; ++t) {
      for (int k = 0; k < K; ++k) {
        const double e = cfg.share_time_sigma * draw();
        s_at(l, t, k) = zero[l * K + k] ? 0.0 : std::exp(base[l * K + k] + e);
      }
    }
  }

  std::vector<double> common_t(T1), common_k(K);
  for (auto& v : common_t) v = draw();
  for (auto& v : common_k) v = draw();
  const double rho = cfg.shock_correlation;
  std::vector<double> g(static_cast<std::size_t>(K) * T1);
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T1; ++t) {
      const double e = draw();
      double u = e;
      if (cfg.shock_process == ShockProcess::period_correlated) u = std::sqrt(rho) * common_t[t] + std::sqrt(1 - rho) * e;
      if (cfg.shock_process == ShockProcess::industry_cluster) u = std::sqrt(rho) * common_k[k] + std::sqrt(1 - rho) * e;
      g[static_cast<std::size_t>(k) * T1 + t] = cfg.shock_mean + cfg.shock_sd * u;
    }
  }

  std::vector<double> eta_k(K), eta(static_cast<std::size_t>(K) * T1);
  for (auto& v : eta_k) v = draw();
  const double pe = cfg.industry_error_persistence;
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T1; ++t) {
      eta[static_cast<std::size_t>(k) * T1 + t] = std::sqrt(pe) * eta_k[k] + std::sqrt(1 - pe) * draw();
    }
  }

  auto instrument = [&](int l, int t, std::size_t r) {
    double z = 0.0;
    for (const auto& code : truth.industry_sets[r]) {
      const auto k = static_cast<int>(std::find(industries.begin(), industries.end(), code) - industries.begin());
      z += s_at(l, t, k) * g[static_cast<std::size_t>(k) * T1 + t];
    }
    return z;
  };

  std::vector<Cell> cells;
  RealSeries y, S;
  std::vector<RealSeries> x(R), z(R);
  std::vector<std::vector<double>> share_rows;
  for (int l = 0; l < L; ++l) {
    for (int t = 0; t < T; ++t) {
      const double idio = draw();
      std::vector<double> v(R);
      for (auto& vi : v) vi = draw();
      const bool missing = cfg.missing_cell_prob > 0.0 && unif(rng) < cfg.missing_cell_prob;
      if (missing) continue;

      double s_total = 0.0, loaded = 0.0;
      std::vector<double> row(K);
      for (int k = 0; k < K; ++k) {
        row[k] = s_at(l, t, k);
        s_total += row[k];
        loaded += row[k] * eta[static_cast<std::size_t>(k) * T1 + t];
      }
      const double eps = cfg.noise * idio + cfg.industry_error_scale * loaded;

      double yv = fe_y[l] + td_y[t] + cfg.share_control_loading * s_total + eps;
      for (std::size_t r = 0; r < R; ++r) {
        const double zr = instrument(l, t, r);
        const double xr = fe_x[l * R + r] + td_x[t * R + r] + cfg.first_stage * zr +
                          cfg.share_control_loading * s_total + cfg.x_noise * v[r] + cfg.endogeneity * eps;
        yv += cfg.groups[r].true_beta * xr + cfg.anticipation * instrument(l, t + 1, r);
        x[r].push_back(xr);
        z[r].push_back(zr);
      }
      cells.push_back({location_code(l), PeriodId{2000 + t}});
      y.push_back(yv);
      S.push_back(s_total);
      share_rows.push_back(std::move(row));
    }
  }

  std::vector<std::pair<std::string, Column>> columns;
  columns.emplace_back("y", std::move(y));
  for (std::size_t r = 0; r < R; ++r) columns.emplace_back(numbered('x', r), std::move(x[r]));
  for (std::size_t r = 0; r < R; ++r) columns.emplace_back(numbered('z', r), std::move(z[r]));
  columns.emplace_back("S", std::move(S));

  SyntheticData out;
  out.truth = std::move(truth);

  SharePanel sp;
  sp.cells = cells;
  std::vector<std::size_t> order(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return industries[a] < industries[b]; });
  for (auto i : order) sp.industries.push_back(industries[i]);
  sp.values.resize(static_cast<Index>(cells.size()), K);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t j = 0; j < order.size(); ++j) sp.values(static_cast<Index>(r), static_cast<Index>(j)) = share_rows[r][order[j]];
  }
  sp.present.assign(cells.size(), true);

  out.panel = PanelDataset(std::move(cells), std::move(columns));
  out.shares = sp.aligned_to(out.panel);

  ShockSeries shocks;
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) shocks.set_value({industries[k], PeriodId{2000 + t}}, g[static_cast<std::size_t>(k) * T1 + t]);
  }
  out.shocks = importance_weights(out.shares, std::move(shocks));
  return out;
}

RegressionSpec synthetic_spec(const DGPConfig& cfg, VcovKind vcov) {
  RegressionSpec spec;
  spec.outcome = "y";
  for (std::size_t r = 0; r < cfg.groups.size(); ++r) {
    spec.endogenous.push_back(numbered('x', r));
    spec.instruments.push_back(numbered('z', r));
  }
  spec.share_control = "S";
  spec.vcov = vcov;
  if (vcov == VcovKind::cluster) spec.cluster_column = "location";
  return spec;
}

std::uint64_t rep_seed(std::uint64_t master, std::uint64_t rep) noexcept {
  return splitmix64(master ^ splitmix64(rep));
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

RepResult run_replication(const DGPConfig& cfg, const MCOptions& options) {
  RepResult rep;
  try {
    const SyntheticData data = generate(cfg);
    const VcovKind location_kind = options.vcov == VcovKind::exposure ? VcovKind::robust : options.vcov;
    const RegressionSpec spec = synthetic_spec(cfg, location_kind);
    const ResidualizedDesign design = absorb(data.panel, spec);
    const IVEstimate iv = estimate_2sls(design);
    rep.beta = to_vector(iv.beta);
    rep.se_robust = to_vector(iv.se);
    rep.first_stage_f = iv.first_stage_f;
    rep.df = {iv.df(), iv.df(), 0.0};

    const bool need_shock = options.check_equivalence || options.exposure_se || options.vcov == VcovKind::exposure;
    if (need_shock) {
      const auto sd = to_shock_level(design, data.shares, data.shocks, data.truth.industry_sets);
      if (options.check_equivalence) {
        const IVEstimate shock = estimate_shock_level_iv(sd);
        rep.equivalence_gap = ((shock.beta - iv.beta).cwiseAbs().array() / iv.beta.cwiseAbs().array().max(1e-300))
                                  .maxCoeff();
      }
      if (options.exposure_se || options.vcov == VcovKind::exposure) {
        const IVEstimate ex = estimate_exposure_robust(design, data.shares, data.shocks, data.truth.industry_sets);
        rep.se_exposure = to_vector(ex.se);
        rep.df[2] = ex.df();
        if (options.vcov == VcovKind::exposure) {
          rep.first_stage_f = ex.first_stage_f;
          rep.df[0] = ex.df();
        }
      }
    }
    rep.se = options.vcov == VcovKind::exposure ? rep.se_exposure : rep.se_robust;

    const IVEstimate ols = estimate_ols(design);
    rep.beta_ols = to_vector(ols.beta);

    if (options.falsification_lag > 0) {
      const IVEstimate f = falsification(data.panel, spec, options.falsification_lag);
      rep.falsification_t = f.t_stat(0);
      rep.falsification_df = f.df();
    }
    rep.ok = true;
  } catch (const std::exception& e) {
    rep = RepResult{};
    rep.error = e.what();
  }
  return rep;
}

MCReport monte_carlo(const DGPConfig& cfg, const MCOptions& options) {
  cfg.check();
  if (options.reps < 2) throw ValidationError("monte_carlo needs reps >= 2");

  std::vector<RepResult> runs(static_cast<std::size_t>(options.reps));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < options.reps; i = next++) {
      DGPConfig c = cfg;
      c.seed = rep_seed(cfg.seed, static_cast<std::uint64_t>(i));
      runs[static_cast<std::size_t>(i)] = run_replication(c, options);
    }
  };
  unsigned n_threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(options.reps));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  MCReport rep;
  rep.reps = options.reps;
  const std::size_t R = cfg.groups.size();
  for (const auto& g : cfg.groups) rep.true_beta.push_back(g.true_beta);

  std::string first_error;
  for (const auto& r : runs) {
    if (!r.ok) {
      ++rep.failures;
      if (first_error.empty()) first_error = r.error;
    }
  }
  if (2 * rep.failures > rep.reps) {
    throw EstimationError("Monte Carlo aborted: " + std::to_string(rep.failures) + " of " + std::to_string(rep.reps) +
                          " replications failed; first failure: " + first_error);
  }
  const double n_ok = static_cast<double>(rep.reps - rep.failures);

  auto zeros = [&] { return std::vector<double>(R, 0.0); };
  rep.mean_beta = zeros();
  rep.mean_bias = zeros();
  rep.rmse = zeros();
  rep.coverage_95 = zeros();
  rep.coverage_robust = zeros();
  rep.coverage_exposure = zeros();
  rep.mean_se = zeros();
  rep.mean_se_robust = zeros();
  rep.mean_se_exposure = zeros();
  rep.sd_beta = zeros();
  rep.mean_F = zeros();
  rep.rejection_rate_5 = zeros();
  rep.ols_mean_bias = zeros();

  auto covers = [](double b, double se, double truth, double df) {
    return std::fabs(b - truth) <= t_critical(0.05, df) * se;
  };
  double ols_worse = 0.0, fals_reject = 0.0;
  for (const auto& r : runs) {
    if (!r.ok) continue;
    bool worse = true;
    for (std::size_t j = 0; j < R; ++j) {
      const double b = r.beta[j], truth = rep.true_beta[j];
      rep.mean_beta[j] += b;
      rep.rmse[j] += (b - truth) * (b - truth);
      rep.coverage_95[j] += covers(b, r.se[j], truth, r.df[0]);
      rep.coverage_robust[j] += covers(b, r.se_robust[j], truth, r.df[1]);
      rep.mean_se[j] += r.se[j];
      rep.mean_se_robust[j] += r.se_robust[j];
      if (!r.se_exposure.empty()) {
        rep.coverage_exposure[j] += covers(b, r.se_exposure[j], truth, r.df[2]);
        rep.mean_se_exposure[j] += r.se_exposure[j];
      }
      rep.mean_F[j] += r.first_stage_f[j];
      rep.rejection_rate_5[j] += std::fabs(b) > t_critical(0.05, r.df[0]) * r.se[j];
      rep.ols_mean_bias[j] += r.beta_ols[j] - truth;
      worse = worse && std::fabs(r.beta_ols[j] - truth) > std::fabs(b - truth);
    }
    ols_worse += worse;
    if (options.falsification_lag > 0) {
      fals_reject += std::fabs(r.falsification_t) > t_critical(options.falsification_level, r.falsification_df);
    }
    rep.max_equivalence_gap = std::max(rep.max_equivalence_gap, r.equivalence_gap);
  }
  for (std::size_t j = 0; j < R; ++j) {
    rep.mean_beta[j] /= n_ok;
    rep.mean_bias[j] = rep.mean_beta[j] - rep.true_beta[j];
    rep.rmse[j] = std::sqrt(rep.rmse[j] / n_ok);
    rep.coverage_95[j] /= n_ok;
    rep.coverage_robust[j] /= n_ok;
    rep.coverage_exposure[j] /= n_ok;
    rep.mean_se[j] /= n_ok;
    rep.mean_se_robust[j] /= n_ok;
    rep.mean_se_exposure[j] /= n_ok;
    rep.mean_F[j] /= n_ok;
    rep.rejection_rate_5[j] /= n_ok;
    rep.ols_mean_bias[j] /= n_ok;
    double ss = 0.0;
    for (const auto& r : runs) {
      if (r.ok) ss += (r.beta[j] - rep.mean_beta[j]) * (r.beta[j] - rep.mean_beta[j]);
    }
    rep.sd_beta[j] = n_ok > 1 ? std::sqrt(ss / (n_ok - 1)) : 0.0;
  }
  rep.ols_worse_share = ols_worse / n_ok;
  rep.rejection_rate_falsification = fals_reject / n_ok;
  rep.falsification_lag = options.falsification_lag;
  rep.runs = std::move(runs);
  return rep;
}

void write_mc_report_json(std::ostream& out, const MCReport& r) {
  nlohmann::ordered_json j;
  j["reps"] = r.reps;
  j["failures"] = r.failures;
  j["true_beta"] = r.true_beta;
  j["mean_beta"] = r.mean_beta;
  j["mean_bias"] = r.mean_bias;
  j["rmse"] = r.rmse;
  j["sd_beta"] = r.sd_beta;
  j["mean_se"] = r.mean_se;
  j["coverage_95"] = r.coverage_95;
  j["coverage_robust"] = r.coverage_robust;
  j["coverage_exposure"] = r.coverage_exposure;
  j["mean_F"] = r.mean_F;
  j["rejection_rate_5"] = r.rejection_rate_5;
  j["ols_mean_bias"] = r.ols_mean_bias;
  j["ols_worse_share"] = r.ols_worse_share;
  if (r.falsification_lag > 0) {
    j["falsification_lag"] = r.falsification_lag;
    j["rejection_rate_falsification"] = r.rejection_rate_falsification;
  }
  j["max_equivalence_gap"] = r.max_equivalence_gap;
  out << j.dump(2) << '\n';
}

void write_mc_report_text(std::ostream& out, const MCReport& r) {
  out << "reps " << r.reps << " (failed " << r.failures << ")\n";
  out << std::left << std::setw(6) << "coef" << std::right << std::setw(10) << "true" << std::setw(11) << "bias"
      << std::setw(10) << "rmse" << std::setw(10) << "cover95" << std::setw(10) << "mean F" << std::setw(11)
      << "OLS bias" << '\n';
  out << std::fixed;
  for (std::size_t j = 0; j < r.true_beta.size(); ++j) {
    out << std::left << std::setw(6) << ("x" + std::to_string(j + 1)) << std::right << std::setprecision(4)
        << std::setw(10) << r.true_beta[j] << std::setw(11) << r.mean_bias[j] << std::setw(10) << r.rmse[j]
        << std::setprecision(3) << std::setw(10) << r.coverage_95[j] << std::setprecision(1) << std::setw(10)
        << r.mean_F[j] << std::setprecision(4) << std::setw(11) << r.ols_mean_bias[j] << '\n';
  }
  if (r.falsification_lag > 0) {
    out << std::setprecision(3) << "falsification rejection rate (outcome at t-" << r.falsification_lag << ") "
        << r.rejection_rate_falsification << '\n';
  }
  out << std::scientific << std::setprecision(2) << "max shock-level equivalence gap " << r.max_equivalence_gap
      << '\n';
  out << std::defaultfloat;
}

}  // namespace ssiv
