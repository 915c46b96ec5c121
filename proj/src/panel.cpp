#include "ssiv/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

#include "ssiv/csv.hpp"
#include "ssiv/error.hpp"

namespace ssiv {

namespace {

bool is_upper_alpha(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

LocationId::LocationId(std::string_view code) : code_(code) {
  if (code.size() != 3 || !std::all_of(code.begin(), code.end(), is_upper_alpha)) {
    throw ValidationError("invalid location code '" + std::string(code) +
                          "': expected 3 uppercase ASCII letters");
  }
}

IndustryId::IndustryId(std::string_view code) : code_(code) {
  if (code.size() != 2 || !is_digit(code[0]) || !is_digit(code[1])) {
    throw ValidationError("invalid HS2 code '" + std::string(code) + "': expected two digits");
  }
}

IndustryId IndustryId::from_number(int chapter) {
  if (chapter < 0 || chapter > 99) {
    throw ValidationError("HS2 chapter out of range: " + std::to_string(chapter));
  }
  const char buf[3] = {static_cast<char>('0' + chapter / 10), static_cast<char>('0' + chapter % 10), 0};
  return IndustryId(buf);
}

std::size_t column_size(const Column& c) {
  return std::visit([](const auto& v) { return v.size(); }, c);
}

bool is_count(const Column& c) { return std::holds_alternative<CountSeries>(c); }

PanelDataset::PanelDataset(std::vector<Cell> cells, std::vector<std::pair<std::string, Column>> columns) {
  const std::size_t n = cells.size();
  std::set<std::string, std::less<>> seen;
  for (const auto& [name, col] : columns) {
    if (name.empty() || name == "location" || name == "period") {
      throw ValidationError("invalid column name '" + name + "'");
    }
    if (!seen.insert(name).second) throw ValidationError("duplicate column name '" + name + "'");
    if (column_size(col) != n) {
      throw ValidationError("column '" + name + "' has " + std::to_string(column_size(col)) +
                            " values for " + std::to_string(n) + " rows");
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cells[a] < cells[b]; });

  cells_.reserve(n);
  for (auto i : order) cells_.push_back(cells[i]);
  for (auto& [name, col] : columns) {
    names_.push_back(name);
    columns_.push_back(std::visit(
        [&](const auto& v) -> Column {
          std::decay_t<decltype(v)> sorted;
          sorted.reserve(n);
          for (auto i : order) sorted.push_back(v[i]);
          return sorted;
        },
        col));
  }
}

std::optional<std::size_t> PanelDataset::find(const LocationId& location, PeriodId period) const {
  const Cell key{location, period};
  auto it = std::lower_bound(cells_.begin(), cells_.end(), key);
  if (it == cells_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - cells_.begin());
}

bool PanelDataset::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Column& PanelDataset::column(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError("unknown column '" + std::string(name) + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

std::optional<double> PanelDataset::value(std::string_view name, std::size_t row) const {
  return std::visit(
      [row](const auto& v) -> std::optional<double> {
        const auto& x = v.at(row);
        if (!x) return std::nullopt;
        return static_cast<double>(*x);
      },
      column(name));
}

PanelDataset PanelDataset::with_column(std::string name, Column col) const {
  if (column_size(col) != rows()) {
    throw ValidationError("column '" + name + "' has wrong length");
  }
  if (name.empty() || name == "location" || name == "period") {
    throw ValidationError("invalid column name '" + name + "'");
  }
  PanelDataset out = *this;
  auto it = std::find(out.names_.begin(), out.names_.end(), name);
  if (it != out.names_.end()) {
    out.columns_[static_cast<std::size_t>(it - out.names_.begin())] = std::move(col);
  } else {
    out.names_.push_back(std::move(name));
    out.columns_.push_back(std::move(col));
  }
  return out;
}

std::vector<LocationId> PanelDataset::locations() const {
  std::vector<LocationId> out;
  for (const auto& c : cells_) {
    if (out.empty() || out.back() != c.location) out.push_back(c.location);
  }
  return out;
}

std::vector<PeriodId> PanelDataset::periods() const {
  std::set<PeriodId> s;
  for (const auto& c : cells_) s.insert(c.period);
  return {s.begin(), s.end()};
}

ValidationReport validate_panel(const PanelDataset& panel, std::span<const std::string> required_columns) {
  ValidationReport report;
  const auto& cells = panel.cells();
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i] == cells[i - 1] && (i < 2 || cells[i - 2] != cells[i])) {
      report.duplicate_cells.push_back(cells[i]);
    }
  }
  for (const auto& name : panel.column_names()) {
    const auto* counts = std::get_if<CountSeries>(&panel.column(name));
    if (!counts) continue;
    for (std::size_t r = 0; r < counts->size(); ++r) {
      if ((*counts)[r] && *(*counts)[r] < 0) {
        report.negative_counts.push_back({cells[r], name, *(*counts)[r]});
      }
    }
  }
  for (const auto& name : required_columns) {
    if (!panel.has_column(name)) {
      for (const auto& c : cells) report.missing_cells.push_back({c, name});
      continue;
    }
    for (std::size_t r = 0; r < cells.size(); ++r) {
      if (!panel.value(name, r)) report.missing_cells.push_back({cells[r], name});
    }
  }
  return report;
}

std::string lag_name(std::string_view column, int lag) {
  return std::string(column) + "_lag" + std::to_string(lag);
}

PanelDataset lag_column(const PanelDataset& panel, std::string_view column, int lag) {
  if (lag < 1) throw ValidationError("lag must be >= 1, got " + std::to_string(lag));
  const Column& src = panel.column(column);
  Column lagged = std::visit(
      [&](const auto& v) -> Column {
        std::decay_t<decltype(v)> out(v.size());
        for (std::size_t r = 0; r < panel.rows(); ++r) {
          const Cell& c = panel.cell(r);
          if (auto prev = panel.find(c.location, PeriodId{c.period.year - lag})) out[r] = v[*prev];
        }
        return out;
      },
      src);
  return panel.with_column(lag_name(column, lag), std::move(lagged));
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void write_panel_csv(std::ostream& out, const PanelDataset& panel) {
  out << "location,period";
  for (const auto& n : panel.column_names()) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    const Cell& c = panel.cell(r);
    out << c.location.code() << ',' << c.period.year;
    for (const auto& n : panel.column_names()) {
      out << ',';
      std::visit(
          [&](const auto& v) {
            if (!v[r]) return;
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, RealSeries>) {
              out << format_real(*v[r]);
            } else {
              out << *v[r];
            }
          },
          panel.column(n));
    }
    out << '\n';
  }
}

PanelDataset read_panel_csv(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  const auto& header = reader.header();
  if (header.size() < 2 || header[0] != "location" || header[1] != "period") {
    throw ParseError(source_name, 1, "panel header must start with location,period");
  }
  const std::size_t ncol = header.size() - 2;
  std::vector<Cell> cells;
  std::vector<std::vector<std::string>> raw(ncol);
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    LocationId loc = [&] {
      try {
        return LocationId(fields[0]);
      } catch (const ValidationError& e) {
        reader.fail(e.what());
      }
    }();
    const int year = static_cast<int>(reader.integer(fields[1], "period"));
    cells.push_back({loc, PeriodId{year}});
    for (std::size_t j = 0; j < ncol; ++j) raw[j].push_back(fields[j + 2]);
  }

  std::vector<std::pair<std::string, Column>> columns;
  for (std::size_t j = 0; j < ncol; ++j) {
    bool any = false;
    bool all_int = true;
    for (const auto& s : raw[j]) {
      if (s.empty()) continue;
      any = true;
      if (!csv::parse_integer(s)) all_int = false;
    }
    if (any && all_int) {
      CountSeries v;
      for (const auto& s : raw[j]) v.push_back(csv::parse_integer(s));
      columns.emplace_back(header[j + 2], std::move(v));
    } else {
      RealSeries v;
      for (std::size_t r = 0; r < raw[j].size(); ++r) {
        const auto& s = raw[j][r];
        if (s.empty()) {
          v.push_back(std::nullopt);
          continue;
        }
        auto x = csv::parse_real(s);
        if (!x) {
          throw ParseError(source_name, r + 2, "column '" + header[j + 2] + "': not a number: '" + s + "'");
        }
        v.push_back(x);
      }
      columns.emplace_back(header[j + 2], std::move(v));
    }
  }
  return PanelDataset(std::move(cells), std::move(columns));
}

PanelDataset read_panel_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file '" + path + "'");
  return read_panel_csv(in, path);
}

void ShockSeries::set_value(const ShockKey& key, std::optional<double> value) {
  entries_[key].value = value;
}

void ShockSeries::set_weight(const ShockKey& key, double weight) {
  if (!(weight >= 0.0)) {
    throw ValidationError("negative importance weight for HS" + key.industry.code() + " " +
                          std::to_string(key.period.year));
  }
  entries_[key].weight = weight;
}

std::optional<double> ShockSeries::value(const ShockKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

double ShockSeries::weight(const ShockKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? 0.0 : it->second.weight;
}

std::size_t ShockSeries::missing_values() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return !e.second.value; }));
}

void write_shocks_csv(std::ostream& out, const ShockSeries& shocks) {
  out << "hs2,year,value,weight\n";
  for (const auto& [key, e] : shocks.entries()) {
    out << key.industry.code() << ',' << key.period.year << ',';
    if (e.value) out << format_real(*e.value);
    out << ',' << format_real(e.weight) << '\n';
  }
}

ShockSeries read_shocks_csv(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.require_header({"hs2", "year", "value", "weight"});
  ShockSeries shocks;
  std::vector<std::string> f;
  while (reader.next(f)) {
    try {
      ShockKey key{IndustryId(f[0]), PeriodId{static_cast<int>(reader.integer(f[1], "year"))}};
      if (shocks.contains(key)) reader.fail("duplicate shock for HS" + f[0] + " " + f[1]);
      shocks.set_value(key, reader.optional_real(f[2], "value"));
      shocks.set_weight(key, f[3].empty() ? 0.0 : reader.real(f[3], "weight"));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      reader.fail(e.what());
    }
  }
  return shocks;
}

ShockSeries read_shocks_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open shocks file '" + path + "'");
  return read_shocks_csv(in, path);
}

}  // namespace ssiv
