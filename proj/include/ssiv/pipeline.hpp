#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssiv/config.hpp"
#include "ssiv/diagnostics.hpp"
#include "ssiv/panel.hpp"
#include "ssiv/regress.hpp"
#include "ssiv/shiftshare.hpp"
#include "ssiv/shocklevel.hpp"

namespace ssiv {

/// Declarative estimation run read from a key = value spec file.
///
///   outcome = conflicts
///   endogenous = mineral_trade
///   instrument_sets = minerals        # built from --shares/--shocks
///   instruments = z1                  # or: existing panel columns
///   controls = unemployment
///   lagged_outcome_control = true
///   share_control = share_total       # column, "auto" (from shares) or "none"
///   vcov = exposure                   # classical | robust | cluster | exposure
///   cluster = location
///   exposure_cluster = industry       # industry | mineral_group | shock
///   normalize = mineral_trade
///   report_ols = true
///   falsify_lags = 1, 2
struct EstimationSpec {
  RegressionSpec regression;
  std::vector<std::string> instrument_sets;
  bool auto_share_control = false;
  ShockCluster exposure_cluster = ShockCluster::industry;
  MissingShockPolicy missing_shocks = MissingShockPolicy::zero;
  bool report_ols = false;
  std::vector<int> falsify_lags;
  int share_lag = 3;
};

EstimationSpec read_estimation_spec(const KeyValueConfig& kv);

/// Panel with instrument and share-control columns filled in, ready for absorb().
struct PreparedData {
  PanelDataset panel;
  RegressionSpec spec;
  std::optional<SharePanel> shares;  ///< aligned with `panel`
  ShockSeries shocks;
  std::vector<std::vector<IndustryId>> industry_sets;  ///< one per instrument when built from sets
  ShockCluster exposure_cluster = ShockCluster::industry;
  std::size_t missing_shock_terms = 0;
};

PreparedData prepare(const EstimationSpec& spec, PanelDataset panel, std::optional<SharePanel> shares,
                     std::optional<ShockSeries> shocks);

/// 2SLS with the inference requested by `spec` (exposure-robust when
/// vcov == exposure). `outcome_lag` shifts the outcome for falsification.
IVEstimate run_iv(const PreparedData& data, int outcome_lag = 0);
IVEstimate run_ols(const PreparedData& data);

struct EquivalenceReport {
  IVEstimate location;
  IVEstimate shock;
  double max_relative_gap = 0.0;
  OrthogonalityCheck orthogonality;
  std::size_t shock_rows = 0;
  std::size_t zero_exposure = 0;
};

EquivalenceReport equivalence_check(const PreparedData& data);

struct LabeledEstimate {
  std::string label;
  IVEstimate estimate;
};

/// "***" p < 0.01, "**" p < 0.05, "*" p < 0.10.
std::string significance_stars(double p);

void write_estimates(std::ostream& out, const std::vector<LabeledEstimate>& columns, ReportFormat format);
void write_equivalence(std::ostream& out, const EquivalenceReport& r, ReportFormat format);

}  // namespace ssiv
