#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ssiv/error.hpp"
#include "ssiv/ingest.hpp"
#include "ssiv/numeric.hpp"

using namespace ssiv;

namespace {

Roster roster_of(std::initializer_list<const char*> codes) {
  std::set<LocationId> m;
  for (auto c : codes) m.insert(LocationId(c));
  return Roster(m);
}

TradeData trade_from(const std::string& body, const Roster& r) {
  std::stringstream ss("exporter,hs2,year,export_usd\n" + body);
  return load_trade(ss, r, "trade.csv");
}

}  // namespace

TEST_CASE("mineral taxonomy covers HS 25, 26 and 27 only") {
  CHECK(mineral_taxonomy(IndustryId("25")) == MineralClass::mineral25);
  CHECK(mineral_taxonomy(IndustryId("26")) == MineralClass::mineral26);
  CHECK(mineral_taxonomy(IndustryId("27")) == MineralClass::mineral27);
  CHECK(mineral_taxonomy(IndustryId("71")) == MineralClass::nonmineral);
  CHECK(is_mineral(IndustryId("27")));
  CHECK_FALSE(is_mineral(IndustryId("24")));
  CHECK_FALSE(is_known_hs2(IndustryId("77")));
  CHECK_FALSE(is_known_hs2(IndustryId("00")));
}

TEST_CASE("roster parsing skips comments and blank lines") {
  std::stringstream ss("# sample\nAGO\n\nNGA  # comment\n");
  const Roster r = read_roster(ss);
  CHECK(r.members().size() == 2);
  CHECK(r.contains(LocationId("NGA")));
}

TEST_CASE("trade rows are summed per key and split by roster") {
  const auto t = trade_from("AGO,27,2005,10\nAGO,27,2005,5\nUSA,27,2005,7\n", roster_of({"AGO"}));
  REQUIRE(t.roster.size() == 1);
  CHECK(t.roster[0].export_value == 15.0);
  CHECK(t.world.size() == 2);
}

TEST_CASE("trade parse errors name the line") {
  const Roster r = roster_of({"AGO"});
  auto line_of = [&](const std::string& body) -> std::size_t {
    try {
      (void)trade_from(body, r);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("AGO,27,2005,1\nAGO,27,2006,-4\n") == 3);
  CHECK(line_of("AGO,77,2005,1\n") == 2);
  CHECK(line_of("AGO,27,2005\n") == 2);
  CHECK(line_of("ago,27,2005,1\n") == 2);
}

TEST_CASE("macro and price loaders enforce value domains") {
  std::stringstream bad_gdp("country,year,gdp_usd,unemployment_pct\nAGO,2000,0,5\n");
  CHECK_THROWS_AS(load_macro(bad_gdp), ParseError);
  std::stringstream bad_unemp("country,year,gdp_usd,unemployment_pct\nAGO,2000,10,101\n");
  CHECK_THROWS_AS(load_macro(bad_unemp), ParseError);
  std::stringstream ok("country,year,gdp_usd,unemployment_pct\nAGO,2000,10,\n");
  const auto m = load_macro(ok);
  REQUIRE(m.size() == 1);
  CHECK_FALSE(m[0].unemployment.has_value());
  std::stringstream bad_price("hs2,year,unit_value_usd\n26,2000,-1\n");
  CHECK_THROWS_AS(load_prices(bad_price), ParseError);
}

TEST_CASE("build_panel joins sources and reports dropped cells") {
  const Roster r = roster_of({"AGO", "BEN", "CMR"});
  const auto trade = trade_from("AGO,26,2001,4\nAGO,01,2001,6\nBEN,27,2001,3\n", r);
  std::stringstream cs("country,year,events,fatalities\nAGO,2001,2,9\nAGO,2001,1,1\n");
  std::stringstream ps("hs2,year,unit_value_usd\n26,2001,3.5\n");
  std::stringstream ms(
      "country,year,gdp_usd,unemployment_pct\nAGO,2001,100,5\nBEN,2001,50,7\nCMR,2001,80,3\n");
  const auto built = build_panel(trade, load_conflicts(cs), load_prices(ps), load_macro(ms), r, {2000, 2020});

  REQUIRE(built.panel.rows() == 2);
  CHECK(*built.panel.value(col::conflicts, 0) == 3.0);
  CHECK(*built.panel.value(col::fatalities, 0) == 10.0);
  CHECK(*built.panel.value(col::incidence, 0) == 1.0);
  CHECK(*built.panel.value(col::mineral_trade, 0) == 4.0);
  CHECK(*built.panel.value(col::nonmineral_trade, 0) == 6.0);
  CHECK(*built.panel.value(col::total_trade, 0) == 10.0);
  CHECK(*built.panel.value(col::conflicts, 1) == 0.0);
  CHECK(*built.panel.value(col::incidence, 1) == 0.0);

  REQUIRE(built.dropped.size() == 1);
  CHECK(built.dropped[0].location.code() == "CMR");
  CHECK(built.dropped[0].reason == "missing_trade");
  CHECK(built.price_gaps == 2);
  CHECK(*built.shocks.value({IndustryId("26"), PeriodId{2001}}) == 3.5);
  CHECK_FALSE(built.shocks.value({IndustryId("27"), PeriodId{2001}}).has_value());

  std::stringstream report;
  write_join_report(report, built.dropped);
  CHECK(report.str() == "{\"location\":\"CMR\",\"period\":2001,\"reason\":\"missing_trade\"}\n");
}

TEST_CASE("exact summation does not depend on order") {
  std::vector<double> v{1e16, 1.0, -1e16, 3.0, 1e-3, 2.5e15, -2.5e15};
  const double a = exact_sum(v);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(v.begin(), v.end(), rng);
    CHECK(exact_sum(v) == a);
  }
  CHECK(a == 4.0 + 1e-3);
}
