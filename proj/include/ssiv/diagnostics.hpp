#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssiv/ingest.hpp"
#include "ssiv/panel.hpp"

namespace ssiv {

struct ShockSummary {
  double mean = 0.0;
  double sd = 0.0;
  double iqr = 0.0;
  std::size_t n_shocks = 0;
  std::size_t n_industries = 0;
  double effective_shocks = 0.0;  ///< 1 / sum of squared normalized weights
  double largest_weight = 0.0;
  bool residualized = false;
};

/// Weighted moments of g_kt using the importance weights of `shocks`, which
/// are normalized to sum to one over the (k,t) entries that have a value and
/// positive weight. When `industries` is given only those codes are used.
ShockSummary shock_summary(const ShockSeries& shocks, bool residualize_on_period,
                           std::optional<std::span<const IndustryId>> industries = std::nullopt);

/// Weighted quantile from the weighted empirical CDF: each point sits at the
/// midpoint of its cumulative weight step, linear in between.
double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q);

struct SummaryRow {
  std::string variable;
  std::string group;  ///< "all", "above_median", "below_median"
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  ///< sample sd (n - 1)
  double min = 0.0;
  double max = 0.0;
};

struct OutcomeSummary {
  std::string split_column;
  double median = 0.0;
  bool degenerate_split = false;  ///< one side of the median is empty
  std::vector<SummaryRow> rows;
};

/// Incidence over all cells; conflicts and fatalities over cells with at
/// least one conflict. Groups split on `split_column` at its median
/// (strictly above vs at-or-below).
OutcomeSummary outcome_summary(const PanelDataset& panel, const std::string& split_column);

struct ExporterShare {
  LocationId exporter;
  double exports = 0.0;
  double share = 0.0;  ///< of world mineral exports in the year
};

struct Concentration {
  int year = 0;
  double world_total = 0.0;
  std::size_t n_exporters = 0;
  std::vector<ExporterShare> top;
  double top_share = 0.0;  ///< sum of `top` shares
};

/// Mineral (HS 25-27) exports per country divided by world mineral exports,
/// descending with ties broken by country code.
Concentration exporter_concentration(std::span<const TradeRecord> world, int year, std::size_t top_n = 10);

enum class ReportFormat { text, json, csv };
ReportFormat parse_report_format(std::string_view s);

void write_report(std::ostream& out, const ShockSummary& s, ReportFormat format);
void write_report(std::ostream& out, const OutcomeSummary& s, ReportFormat format);
void write_report(std::ostream& out, const Concentration& c, ReportFormat format);

}  // namespace ssiv
