#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ssiv/panel.hpp"

namespace ssiv {

enum class MineralClass { mineral25, mineral26, mineral27, nonmineral };

/// HS chapters 25, 26, 27 are mineral products; everything else is not.
MineralClass mineral_taxonomy(const IndustryId& industry);
bool is_mineral(const IndustryId& industry);
std::string_view describe(MineralClass c);
std::string_view to_string(MineralClass c);

/// Chapters that exist in the HS nomenclature (01-97 without 77, plus 98/99
/// used by customs for special transactions).
bool is_known_hs2(const IndustryId& industry);

struct TradeRecord {
  LocationId exporter;
  IndustryId industry;
  PeriodId period;
  double export_value = 0.0;  ///< USD, >= 0
};

struct ConflictRecord {
  LocationId location;
  PeriodId period;
  std::int64_t events = 0;
  std::int64_t fatalities = 0;
};

struct PriceRecord {
  IndustryId industry;
  PeriodId period;
  double unit_value = 0.0;  ///< USD per unit, > 0
};

struct MacroRecord {
  LocationId location;
  PeriodId period;
  double gdp = 0.0;
  std::optional<double> unemployment;  ///< percent
};

/// Country list defining the estimation sample (one ISO3 code per line,
/// `#` comments allowed).
class Roster {
 public:
  Roster() = default;
  explicit Roster(std::set<LocationId> members) : members_(std::move(members)) {}

  bool contains(const LocationId& l) const { return members_.contains(l); }
  const std::set<LocationId>& members() const noexcept { return members_; }

 private:
  std::set<LocationId> members_;
};

Roster read_roster(std::istream& in, const std::string& source_name = "<roster>");
Roster read_roster_file(const std::string& path);

struct TradeData {
  std::vector<TradeRecord> roster;  ///< exporters in the roster, aggregated
  std::vector<TradeRecord> world;   ///< every exporter, aggregated; for concentration stats
};

/// trade.csv: exporter,hs2,year,export_usd. Rows are summed per
/// (exporter, hs2, year); the sum is exact and independent of row order.
TradeData load_trade(std::istream& in, const Roster& roster, const std::string& source_name = "<trade>");
TradeData load_trade_file(const std::string& path, const Roster& roster);

/// conflicts.csv: country,year,events,fatalities. Repeated keys are summed.
std::vector<ConflictRecord> load_conflicts(std::istream& in, const std::string& source_name = "<conflicts>");
std::vector<ConflictRecord> load_conflicts_file(const std::string& path);

/// prices.csv: hs2,year,unit_value_usd.
std::vector<PriceRecord> load_prices(std::istream& in, const std::string& source_name = "<prices>");
std::vector<PriceRecord> load_prices_file(const std::string& path);

/// macro.csv: country,year,gdp_usd,unemployment_pct.
std::vector<MacroRecord> load_macro(std::istream& in, const std::string& source_name = "<macro>");
std::vector<MacroRecord> load_macro_file(const std::string& path);

/// deflator.csv: year,factor. Export values are multiplied by the factor of
/// their year; years absent from the table are left unchanged.
std::map<int, double> load_deflator(std::istream& in, const std::string& source_name = "<deflator>");
void apply_deflator(TradeData& trade, const std::map<int, double>& factors);

struct JoinDrop {
  LocationId location;
  PeriodId period;
  std::string reason;
};

struct BuiltPanel {
  PanelDataset panel;
  ShockSeries shocks;
  std::vector<JoinDrop> dropped;
  std::size_t price_gaps = 0;  ///< industry-periods with trade but no unit value
};

/// Column names produced by build_panel.
namespace col {
inline constexpr std::string_view conflicts = "conflicts";
inline constexpr std::string_view fatalities = "fatalities";
inline constexpr std::string_view incidence = "incidence";
inline constexpr std::string_view mineral_trade = "mineral_trade";
inline constexpr std::string_view nonmineral_trade = "nonmineral_trade";
inline constexpr std::string_view total_trade = "total_trade";
inline constexpr std::string_view trade_hs25 = "trade_hs25";
inline constexpr std::string_view trade_hs26 = "trade_hs26";
inline constexpr std::string_view trade_hs27 = "trade_hs27";
inline constexpr std::string_view gdp = "gdp";
inline constexpr std::string_view unemployment = "unemployment";
}  // namespace col

/// Joins the four sources into one cell per roster location-period in the
/// window. A cell needs both a macro record (for GDP) and at least one trade
/// record; otherwise it is dropped and reported. A kept cell without a
/// conflict record has zero events. Shocks are unit values per HS2-period.
BuiltPanel build_panel(const TradeData& trade, const std::vector<ConflictRecord>& conflicts,
                       const std::vector<PriceRecord>& prices, const std::vector<MacroRecord>& macro,
                       const Roster& roster, YearWindow window = {});

/// One JSON object per line: {"location","period","reason"}.
void write_join_report(std::ostream& out, const std::vector<JoinDrop>& dropped);

}  // namespace ssiv
