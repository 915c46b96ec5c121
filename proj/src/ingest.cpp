#include "ssiv/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <tuple>

#include "json.hpp"

#include "ssiv/csv.hpp"
#include "ssiv/error.hpp"
#include "ssiv/numeric.hpp"

namespace ssiv {

MineralClass mineral_taxonomy(const IndustryId& industry) {
  switch (industry.number()) {
    case 25: return MineralClass::mineral25;
    case 26: return MineralClass::mineral26;
    case 27: return MineralClass::mineral27;
    default: return MineralClass::nonmineral;
  }
}

bool is_mineral(const IndustryId& industry) {
  return mineral_taxonomy(industry) != MineralClass::nonmineral;
}

std::string_view describe(MineralClass c) {
  switch (c) {
    case MineralClass::mineral25: return "salt, sulphur, earths and stone, plastering materials, lime and cement";
    case MineralClass::mineral26: return "ores, slag and ash";
    case MineralClass::mineral27:
      return "mineral fuels, mineral oils and products of their distillation, bituminous substances, mineral waxes";
    case MineralClass::nonmineral: return "non-mineral products";
  }
  return "";
}

std::string_view to_string(MineralClass c) {
  switch (c) {
    case MineralClass::mineral25: return "mineral25";
    case MineralClass::mineral26: return "mineral26";
    case MineralClass::mineral27: return "mineral27";
    case MineralClass::nonmineral: return "nonmineral";
  }
  return "";
}

bool is_known_hs2(const IndustryId& industry) {
  const int n = industry.number();
  return n >= 1 && n <= 99 && n != 77;
}

namespace {

template <class F>
auto at_line(const csv::Reader& reader, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& e) {
    reader.fail(e.what());
  }
}

std::ifstream open_or_throw(const std::string& path, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + std::string(what) + " file '" + path + "'");
  return in;
}

}  // namespace

Roster read_roster(std::istream& in, const std::string& source_name) {
  std::set<LocationId> members;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line.erase(std::remove_if(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
               line.end());
    if (line.empty()) continue;
    try {
      members.insert(LocationId(line));
    } catch (const ValidationError& e) {
      throw ParseError(source_name, n, e.what());
    }
  }
  if (members.empty()) throw ValidationError("roster '" + source_name + "' is empty");
  return Roster(std::move(members));
}

Roster read_roster_file(const std::string& path) {
  auto in = open_or_throw(path, "roster");
  return read_roster(in, path);
}

TradeData load_trade(std::istream& in, const Roster& roster, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.require_header({"exporter", "hs2", "year", "export_usd"});

  using Key = std::tuple<LocationId, IndustryId, PeriodId>;
  std::map<Key, ExactSum> sums;
  std::vector<std::string> f;
  while (reader.next(f)) {
    at_line(reader, [&] {
      LocationId exporter(f[0]);
      IndustryId industry(f[1]);
      if (!is_known_hs2(industry)) reader.fail("unknown HS2 code '" + f[1] + "'");
      PeriodId period{static_cast<int>(reader.integer(f[2], "year"))};
      const double value = reader.real(f[3], "export_usd");
      if (value < 0.0) reader.fail("negative export value " + f[3]);
      sums[{exporter, industry, period}].add(value);
    });
  }

  TradeData out;
  for (const auto& [key, sum] : sums) {
    TradeRecord rec{std::get<0>(key), std::get<1>(key), std::get<2>(key), sum.value()};
    if (roster.contains(rec.exporter)) out.roster.push_back(rec);
    out.world.push_back(std::move(rec));
  }
  return out;
}

TradeData load_trade_file(const std::string& path, const Roster& roster) {
  auto in = open_or_throw(path, "trade");
  return load_trade(in, roster, path);
}

std::vector<ConflictRecord> load_conflicts(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.require_header({"country", "year", "events", "fatalities"});
  std::map<std::pair<LocationId, PeriodId>, std::pair<std::int64_t, std::int64_t>> sums;
  std::vector<std::string> f;
  while (reader.next(f)) {
    at_line(reader, [&] {
      LocationId loc(f[0]);
      PeriodId period{static_cast<int>(reader.integer(f[1], "year"))};
      const auto events = reader.integer(f[2], "events");
      const auto fatalities = reader.integer(f[3], "fatalities");
      if (events < 0 || fatalities < 0) reader.fail("negative conflict count");
      auto& s = sums[{loc, period}];
      s.first += events;
      s.second += fatalities;
    });
  }
  std::vector<ConflictRecord> out;
  out.reserve(sums.size());
  for (const auto& [key, s] : sums) out.push_back({key.first, key.second, s.first, s.second});
  return out;
}

std::vector<ConflictRecord> load_conflicts_file(const std::string& path) {
  auto in = open_or_throw(path, "conflicts");
  return load_conflicts(in, path);
}

std::vector<PriceRecord> load_prices(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.require_header({"hs2", "year", "unit_value_usd"});
  std::map<std::pair<IndustryId, PeriodId>, double> values;
  std::vector<std::string> f;
  while (reader.next(f)) {
    at_line(reader, [&] {
      IndustryId industry(f[0]);
      if (!is_known_hs2(industry)) reader.fail("unknown HS2 code '" + f[0] + "'");
      PeriodId period{static_cast<int>(reader.integer(f[1], "year"))};
      const double v = reader.real(f[2], "unit_value_usd");
      if (!(v > 0.0)) reader.fail("unit value must be strictly positive, got " + f[2]);
      if (!values.emplace(std::pair{industry, period}, v).second) {
        reader.fail("duplicate unit value for HS" + f[0] + " " + f[1]);
      }
    });
  }
  std::vector<PriceRecord> out;
  for (const auto& [key, v] : values) out.push_back({key.first, key.second, v});
  return out;
}

std::vector<PriceRecord> load_prices_file(const std::string& path) {
  auto in = open_or_throw(path, "prices");
  return load_prices(in, path);
}

std::vector<MacroRecord> load_macro(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.require_header({"country", "year", "gdp_usd", "unemployment_pct"});
  std::map<std::pair<LocationId, PeriodId>, MacroRecord> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    at_line(reader, [&] {
      LocationId loc(f[0]);
      PeriodId period{static_cast<int>(reader.integer(f[1], "year"))};
      const double gdp = reader.real(f[2], "gdp_usd");
      if (!(gdp > 0.0)) reader.fail("GDP must be strictly positive, got " + f[2]);
      auto unemployment = reader.optional_real(f[3], "unemployment_pct");
      if (unemployment && (*unemployment < 0.0 || *unemployment > 100.0)) {
        reader.fail("unemployment outside [0,100]: " + f[3]);
      }
      if (!rows.emplace(std::pair{loc, period}, MacroRecord{loc, period, gdp, unemployment}).second) {
        reader.fail("duplicate macro record for " + f[0] + " " + f[1]);
      }
    });
  }
  std::vector<MacroRecord> out;
  for (auto& [key, r] : rows) out.push_back(std::move(r));
  return out;
}

std::vector<MacroRecord> load_macro_file(const std::string& path) {
  auto in = open_or_throw(path, "macro");
  return load_macro(in, path);
}

std::map<int, double> load_deflator(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.require_header({"year", "factor"});
  std::map<int, double> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const int year = static_cast<int>(reader.integer(f[0], "year"));
    const double factor = reader.real(f[1], "factor");
    if (!(factor > 0.0)) reader.fail("deflator factor must be positive");
    if (!out.emplace(year, factor).second) reader.fail("duplicate deflator year");
  }
  return out;
}

void apply_deflator(TradeData& trade, const std::map<int, double>& factors) {
  for (auto* records : {&trade.roster, &trade.world}) {
    for (auto& r : *records) {
      if (auto it = factors.find(r.period.year); it != factors.end()) r.export_value *= it->second;
    }
  }
}

BuiltPanel build_panel(const TradeData& trade, const std::vector<ConflictRecord>& conflicts,
                       const std::vector<PriceRecord>& prices, const std::vector<MacroRecord>& macro,
                       const Roster& roster, YearWindow window) {
  struct Accum {
    bool has_trade = false;
    ExactSum mineral, nonmineral, hs25, hs26, hs27;
    const MacroRecord* macro = nullptr;
    const ConflictRecord* conflict = nullptr;
  };
  std::map<Cell, Accum> cells;
  std::set<ShockKey> traded;

  for (const auto& r : trade.roster) {
    if (!window.contains(r.period)) continue;
    auto& a = cells[{r.exporter, r.period}];
    a.has_trade = true;
    switch (mineral_taxonomy(r.industry)) {
      case MineralClass::mineral25: a.hs25.add(r.export_value); a.mineral.add(r.export_value); break;
      case MineralClass::mineral26: a.hs26.add(r.export_value); a.mineral.add(r.export_value); break;
      case MineralClass::mineral27: a.hs27.add(r.export_value); a.mineral.add(r.export_value); break;
      case MineralClass::nonmineral: a.nonmineral.add(r.export_value); break;
    }
    traded.insert({r.industry, r.period});
  }
  for (const auto& m : macro) {
    if (roster.contains(m.location) && window.contains(m.period)) cells[{m.location, m.period}].macro = &m;
  }
  for (const auto& c : conflicts) {
    if (roster.contains(c.location) && window.contains(c.period)) cells[{c.location, c.period}].conflict = &c;
  }

  BuiltPanel out;
  std::vector<Cell> kept;
  CountSeries conflicts_col, fatalities_col, incidence_col;
  RealSeries mineral_col, nonmineral_col, total_col, hs25_col, hs26_col, hs27_col, gdp_col, unemp_col;

  for (const auto& [cell, a] : cells) {
    if (!a.macro || !a.has_trade) {
      const char* reason = !a.macro && !a.has_trade ? "missing_trade_and_macro"
                           : !a.macro               ? "missing_macro"
                                                    : "missing_trade";
      out.dropped.push_back({cell.location, cell.period, reason});
      continue;
    }
    kept.push_back(cell);
    const std::int64_t events = a.conflict ? a.conflict->events : 0;
    conflicts_col.push_back(events);
    fatalities_col.push_back(a.conflict ? a.conflict->fatalities : 0);
    incidence_col.push_back(events >= 1 ? 1 : 0);
    mineral_col.push_back(a.mineral.value());
    nonmineral_col.push_back(a.nonmineral.value());
    total_col.push_back(a.mineral.value() + a.nonmineral.value());
    hs25_col.push_back(a.hs25.value());
    hs26_col.push_back(a.hs26.value());
    hs27_col.push_back(a.hs27.value());
    gdp_col.push_back(a.macro->gdp);
    unemp_col.push_back(a.macro->unemployment);
  }

  std::vector<std::pair<std::string, Column>> columns;
  columns.emplace_back(col::conflicts, std::move(conflicts_col));
  columns.emplace_back(col::fatalities, std::move(fatalities_col));
  columns.emplace_back(col::incidence, std::move(incidence_col));
  columns.emplace_back(col::mineral_trade, std::move(mineral_col));
  columns.emplace_back(col::nonmineral_trade, std::move(nonmineral_col));
  columns.emplace_back(col::total_trade, std::move(total_col));
  columns.emplace_back(col::trade_hs25, std::move(hs25_col));
  columns.emplace_back(col::trade_hs26, std::move(hs26_col));
  columns.emplace_back(col::trade_hs27, std::move(hs27_col));
  columns.emplace_back(col::gdp, std::move(gdp_col));
  columns.emplace_back(col::unemployment, std::move(unemp_col));
  out.panel = PanelDataset(std::move(kept), std::move(columns));

  for (const auto& p : prices) {
    if (window.contains(p.period)) out.shocks.set_value({p.industry, p.period}, p.unit_value);
  }
  for (const auto& key : traded) {
    if (!out.shocks.contains(key)) {
      out.shocks.set_value(key, std::nullopt);
      ++out.price_gaps;
    }
  }
  return out;
}

void write_join_report(std::ostream& out, const std::vector<JoinDrop>& dropped) {
  for (const auto& d : dropped) {
    nlohmann::ordered_json j;
    j["location"] = d.location.code();
    j["period"] = d.period.year;
    j["reason"] = d.reason;
    out << j.dump() << '\n';
  }
}

}  // namespace ssiv
