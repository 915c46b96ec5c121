#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ssiv/ingest.hpp"
#include "ssiv/panel.hpp"

namespace ssiv {

/// Exposure shares s_lkt = X_{l,k,t-lag} / GDP_{l,t-lag}, one row per panel
/// cell. Shares need not sum to one across industries.
struct SharePanel {
  std::vector<Cell> cells;
  std::vector<IndustryId> industries;  ///< sorted, unique
  Eigen::MatrixXd values;              ///< cells x industries
  std::vector<bool> present;           ///< false when the lagged cell is unavailable
  int lag_applied = 0;
  std::vector<Cell> excluded_gdp;      ///< cells whose lagged GDP was not positive

  std::size_t rows() const noexcept { return cells.size(); }
  std::optional<std::size_t> industry_index(const IndustryId& k) const;
  std::optional<double> share(std::size_t row, const IndustryId& k) const;

  /// Rows reordered to match `panel`; panel cells without shares are absent.
  SharePanel aligned_to(const PanelDataset& panel) const;
};

/// Shares for every panel row from the roster trade records. A lagged cell
/// that exists with no trade in industry k gets share 0; a lagged cell that
/// does not exist leaves the row missing.
SharePanel compute_shares(const PanelDataset& panel, std::span<const TradeRecord> trade, int lag = 3,
                          std::string_view gdp_column = col::gdp);

struct IncompleteShareControl {
  std::vector<Cell> cells;
  RealSeries values;  ///< S_lt = sum over all industries of s_lkt
};

IncompleteShareControl compute_incomplete_control(const SharePanel& shares);

enum class MissingShockPolicy {
  zero,  ///< a missing g_kt contributes nothing; the term is counted
  drop,  ///< any missing g_kt with positive share makes z_lt missing
};

struct Instrument {
  std::string name;
  std::vector<IndustryId> industries;
  RealSeries values;                     ///< z_lt aligned with the share rows
  std::size_t missing_shock_terms = 0;   ///< (l,k,t) terms hit by a price gap
};

/// z_lt = sum_{k in industries} s_lkt * g_kt.
Instrument build_instrument(const SharePanel& shares, const ShockSeries& shocks,
                            std::span<const IndustryId> industries, std::string name = "z",
                            MissingShockPolicy policy = MissingShockPolicy::zero);

/// Resolves "minerals", "nonminerals", "all", "hs25", or a colon list such
/// as "hs:25:26" against the industries present in `shares`.
std::vector<IndustryId> resolve_industry_set(std::string_view name, const SharePanel& shares);

enum class WeightAveraging {
  per_period,  ///< s_kt = mean over locations within period t
  pooled,      ///< s_k = mean over all location-periods, repeated for every t
};

/// Fills ShockSeries weights with average exposure shares over the rows in
/// `sample_rows` (all present rows when empty).
ShockSeries importance_weights(const SharePanel& shares, ShockSeries shocks,
                               WeightAveraging averaging = WeightAveraging::per_period,
                               std::span<const std::size_t> sample_rows = {});

/// Wide export: location,period,share_<hs2>... in the panel CSV cell format.
PanelDataset shares_as_panel(const SharePanel& shares);
SharePanel shares_from_panel(const PanelDataset& panel, int lag_applied);

std::string share_column_name(const IndustryId& k);

}  // namespace ssiv
