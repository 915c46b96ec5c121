#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ssiv {

/// Three-letter uppercase country code (ISO 3166 alpha-3 style).
class LocationId {
 public:
  explicit LocationId(std::string_view code);

  const std::string& code() const noexcept { return code_; }
  auto operator<=>(const LocationId&) const = default;

 private:
  std::string code_;
};

/// HS2 chapter code, always two decimal digits ("01" .. "99").
class IndustryId {
 public:
  explicit IndustryId(std::string_view code);
  static IndustryId from_number(int chapter);

  const std::string& code() const noexcept { return code_; }
  int number() const noexcept { return (code_[0] - '0') * 10 + (code_[1] - '0'); }
  auto operator<=>(const IndustryId&) const = default;

 private:
  std::string code_;
};

struct PeriodId {
  int year = 0;
  auto operator<=>(const PeriodId&) const = default;
};

struct YearWindow {
  int first = 2000;
  int last = 2020;
  bool contains(PeriodId p) const noexcept { return p.year >= first && p.year <= last; }
};

struct Cell {
  LocationId location;
  PeriodId period;
  auto operator<=>(const Cell&) const = default;
};

using RealSeries = std::vector<std::optional<double>>;
using CountSeries = std::vector<std::optional<std::int64_t>>;
/// One value (or explicit missing marker) per panel row.
using Column = std::variant<RealSeries, CountSeries>;

std::size_t column_size(const Column& c);
bool is_count(const Column& c);

/// Location x period store. Rows are kept sorted by (location, period);
/// duplicates are representable so that validation can report them.
/// Immutable once constructed.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<Cell> cells, std::vector<std::pair<std::string, Column>> columns);

  std::size_t rows() const noexcept { return cells_.size(); }
  const std::vector<Cell>& cells() const noexcept { return cells_; }
  const Cell& cell(std::size_t row) const { return cells_.at(row); }

  /// First row holding (location, period), if any.
  std::optional<std::size_t> find(const LocationId& location, PeriodId period) const;

  const std::vector<std::string>& column_names() const noexcept { return names_; }
  bool has_column(std::string_view name) const;
  /// Throws ValidationError on unknown column.
  const Column& column(std::string_view name) const;
  std::optional<double> value(std::string_view name, std::size_t row) const;

  /// Copy with `name` added (or replaced when it already exists).
  PanelDataset with_column(std::string name, Column column) const;

  std::vector<LocationId> locations() const;
  std::vector<PeriodId> periods() const;

  bool operator==(const PanelDataset&) const = default;

 private:
  std::vector<Cell> cells_;
  std::vector<std::string> names_;
  std::vector<Column> columns_;
};

struct ValidationReport {
  struct NegativeCount {
    Cell cell;
    std::string column;
    std::int64_t value;
  };
  struct MissingCell {
    Cell cell;
    std::string column;
  };

  std::vector<Cell> duplicate_cells;
  std::vector<NegativeCount> negative_counts;
  std::vector<MissingCell> missing_cells;

  bool empty() const noexcept {
    return duplicate_cells.empty() && negative_counts.empty() && missing_cells.empty();
  }
};

/// Flags duplicate cells, negative values in count columns, and missing
/// values in any of `required_columns`.
ValidationReport validate_panel(const PanelDataset& panel,
                                std::span<const std::string> required_columns = {});

std::string lag_name(std::string_view column, int lag);

/// Adds `<col>_lag<L>` holding col at (l, t - L); missing where that cell
/// does not exist. Periods are matched by year, so gaps are respected.
PanelDataset lag_column(const PanelDataset& panel, std::string_view column, int lag);

/// Columnar CSV: `location,period,<columns...>`, empty string for missing.
/// Integer-only columns read back as counts.
void write_panel_csv(std::ostream& out, const PanelDataset& panel);
PanelDataset read_panel_csv(std::istream& in, const std::string& source_name = "<panel>");
PanelDataset read_panel_csv_file(const std::string& path);

struct ShockKey {
  IndustryId industry;
  PeriodId period;
  auto operator<=>(const ShockKey&) const = default;
};

struct ShockEntry {
  std::optional<double> value;  ///< g_kt; nullopt marks a price gap
  double weight = 0.0;          ///< importance weight s_kt
  bool operator==(const ShockEntry&) const = default;
};

/// Industry-period shocks with importance weights.
class ShockSeries {
 public:
  void set_value(const ShockKey& key, std::optional<double> value);
  /// Throws ValidationError for negative weights.
  void set_weight(const ShockKey& key, double weight);

  std::optional<double> value(const ShockKey& key) const;
  double weight(const ShockKey& key) const;
  bool contains(const ShockKey& key) const { return entries_.contains(key); }

  const std::map<ShockKey, ShockEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t missing_values() const;

  bool operator==(const ShockSeries&) const = default;

 private:
  std::map<ShockKey, ShockEntry> entries_;
};

/// `hs2,year,value,weight` with empty value for gaps.
void write_shocks_csv(std::ostream& out, const ShockSeries& shocks);
ShockSeries read_shocks_csv(std::istream& in, const std::string& source_name = "<shocks>");
ShockSeries read_shocks_csv_file(const std::string& path);

/// Shortest round-trip decimal representation. Integral values keep a
/// trailing ".0" so they stay distinguishable from counts.
std::string format_real(double v);

}  // namespace ssiv
