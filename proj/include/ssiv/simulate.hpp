#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssiv/config.hpp"
#include "ssiv/panel.hpp"
#include "ssiv/regress.hpp"
#include "ssiv/shiftshare.hpp"

namespace ssiv {

enum class ShockProcess {
  iid,               ///< g_kt ~ N(mean, sd)
  period_correlated, ///< common period component plus industry noise
  industry_cluster,  ///< persistent industry component plus noise
};

std::string_view to_string(ShockProcess p);
ShockProcess parse_shock_process(std::string_view s);

/// One endogenous regressor per industry group; group r is instrumented by
/// z_r = sum_{k in group r} s_lkt g_kt.
struct IndustryGroup {
  int n_industries = 3;
  double true_beta = 0.059;
};

struct DGPConfig {
  int n_locations = 54;
  int n_periods = 17;
  std::vector<IndustryGroup> groups{IndustryGroup{}};

  // s_lkt = exp(share_mu + share_sigma * a_lk + share_time_sigma * b_lkt), zero with share_zero_prob
  double share_mu = -3.0;
  double share_sigma = 1.0;
  double share_time_sigma = 0.2;
  double share_zero_prob = 0.1;

  ShockProcess shock_process = ShockProcess::iid;
  double shock_mean = 1.0;
  double shock_sd = 1.0;
  double shock_correlation = 0.5;  ///< variance share of the common component

  double first_stage = 10.0;          ///< coefficient of z_r in x_r
  double share_control_loading = 0.5; ///< coefficient of S_lt in x_r and y
  double x_noise = 1.0;
  double noise = 1.0;                 ///< idiosyncratic outcome error sd
  double endogeneity = 0.0;           ///< loading of the outcome error in x
  double industry_error_scale = 0.0;  ///< outcome error sum_k s_lkt eta_kt
  double industry_error_persistence = 0.0;  ///< variance share of eta_k in eta_kt
  double anticipation = 0.0;          ///< y_t loads on sum_r z_{r,t+1}
  double fe_scale = 1.0;
  double missing_cell_prob = 0.0;     ///< cells removed at random (unbalanced panels)
  std::uint64_t seed = 1;

  void check() const;
};

DGPConfig read_dgp_config(const KeyValueConfig& kv);

struct Truth {
  std::vector<double> beta;
  std::vector<std::vector<IndustryId>> industry_sets;
  std::uint64_t seed = 0;
};

/// Panel columns: y, x1..xR, z1..zR, S.
struct SyntheticData {
  PanelDataset panel;
  ShockSeries shocks;  ///< g_kt with per-period average-share weights
  SharePanel shares;   ///< aligned with `panel`
  Truth truth;
};

SyntheticData generate(const DGPConfig& cfg);

/// RegressionSpec matching the columns of generate().
RegressionSpec synthetic_spec(const DGPConfig& cfg, VcovKind vcov = VcovKind::robust);

struct MCOptions {
  int reps = 500;
  VcovKind vcov = VcovKind::robust;  ///< inference reported in coverage_95 and mean_F
  int falsification_lag = 0;         ///< 0 skips the falsification regression
  double falsification_level = 0.10;
  bool check_equivalence = true;
  bool exposure_se = false;          ///< also compute industry-clustered shock-level se
  unsigned threads = 0;              ///< 0 = hardware concurrency
};

struct RepResult {
  bool ok = false;
  std::string error;
  std::vector<double> beta;
  std::vector<double> se;             ///< by MCOptions::vcov
  std::vector<double> se_robust;
  std::vector<double> se_exposure;
  std::vector<double> beta_ols;
  std::vector<double> first_stage_f;
  std::vector<double> df;             ///< df of se, se_robust, se_exposure
  double falsification_t = 0.0;
  double falsification_df = 0.0;
  double equivalence_gap = 0.0;
};

struct MCReport {
  int reps = 0;
  int failures = 0;
  std::vector<double> true_beta;
  std::vector<double> mean_beta;
  std::vector<double> mean_bias;
  std::vector<double> rmse;
  std::vector<double> coverage_95;
  std::vector<double> coverage_robust;
  std::vector<double> coverage_exposure;
  std::vector<double> mean_se;
  std::vector<double> mean_se_robust;
  std::vector<double> mean_se_exposure;
  std::vector<double> sd_beta;
  std::vector<double> mean_F;
  std::vector<double> rejection_rate_5;  ///< H0: beta_r = 0 at 5%
  std::vector<double> ols_mean_bias;
  double ols_worse_share = 0.0;          ///< reps with |OLS bias| > |2SLS bias| on every coefficient
  int falsification_lag = 0;
  double rejection_rate_falsification = 0.0;
  double max_equivalence_gap = 0.0;
  std::vector<RepResult> runs;
};

/// Per-rep seed: splitmix64(master ^ splitmix64(rep)). Results do not
/// depend on the number of threads.
std::uint64_t rep_seed(std::uint64_t master, std::uint64_t rep) noexcept;

RepResult run_replication(const DGPConfig& cfg, const MCOptions& options);

/// Throws EstimationError when more than half of the replications fail.
MCReport monte_carlo(const DGPConfig& cfg, const MCOptions& options);

void write_mc_report_json(std::ostream& out, const MCReport& r);
void write_mc_report_text(std::ostream& out, const MCReport& r);

}  // namespace ssiv
