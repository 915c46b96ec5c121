#include "doctest.h"
#include "ssiv/error.hpp"
#include "ssiv/shiftshare.hpp"

using namespace ssiv;

namespace {

Cell cell(const char* l, int y) { return {LocationId(l), PeriodId{y}}; }

struct Fixture {
  PanelDataset panel;
  std::vector<TradeRecord> trade;
  ShockSeries shocks;
};

// AGO 2000-2004 with GDP 100..140; BEN 2003-2004 only (no lagged data).
Fixture fixture() {
  Fixture f;
  f.panel = PanelDataset({cell("AGO", 2000), cell("AGO", 2001), cell("AGO", 2002), cell("AGO", 2003),
                          cell("AGO", 2004), cell("BEN", 2003), cell("BEN", 2004)},
                         {{"gdp", RealSeries{100.0, 110.0, 120.0, 130.0, 140.0, 50.0, 60.0}}});
  auto rec = [](const char* l, const char* k, int y, double v) {
    return TradeRecord{LocationId(l), IndustryId(k), PeriodId{y}, v};
  };
  f.trade = {rec("AGO", "26", 2000, 10.0), rec("AGO", "27", 2000, 30.0), rec("AGO", "01", 2000, 5.0),
             rec("AGO", "26", 2001, 22.0)};
  for (int y = 2000; y <= 2004; ++y) {
    f.shocks.set_value({IndustryId("26"), PeriodId{y}}, 2.0);
    f.shocks.set_value({IndustryId("27"), PeriodId{y}}, -1.0);
    f.shocks.set_value({IndustryId("01"), PeriodId{y}}, 4.0);
  }
  return f;
}

}  // namespace

TEST_CASE("shares are lagged exports over lagged GDP") {
  const auto f = fixture();
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  CHECK(s.lag_applied == 3);
  CHECK(s.industries.size() == 3);
  // AGO 2003 uses 2000: 10/100, 30/100, 5/100
  CHECK(*s.share(3, IndustryId("26")) == doctest::Approx(0.10));
  CHECK(*s.share(3, IndustryId("27")) == doctest::Approx(0.30));
  CHECK(*s.share(3, IndustryId("01")) == doctest::Approx(0.05));
  // AGO 2004 uses 2001: 22/110 in HS26, zero elsewhere
  CHECK(*s.share(4, IndustryId("26")) == doctest::Approx(0.20));
  CHECK(*s.share(4, IndustryId("27")) == 0.0);
  // AGO 2000-2002 and BEN have no lagged cell
  CHECK_FALSE(s.share(0, IndustryId("26")).has_value());
  CHECK_FALSE(s.share(5, IndustryId("26")).has_value());
  // lag 0 uses the same year
  const SharePanel s0 = compute_shares(f.panel, f.trade, 0);
  CHECK(*s0.share(0, IndustryId("27")) == doctest::Approx(0.30));
  CHECK_THROWS_AS(compute_shares(f.panel, f.trade, -1), ValidationError);
}

TEST_CASE("non-positive lagged GDP excludes the cell") {
  auto f = fixture();
  f.panel = f.panel.with_column("gdp", RealSeries{0.0, 110.0, 120.0, 130.0, 140.0, 50.0, 60.0});
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  CHECK_FALSE(s.present[3]);
  REQUIRE(s.excluded_gdp.size() == 1);
  CHECK(s.excluded_gdp[0] == cell("AGO", 2003));
}

TEST_CASE("incomplete share control sums all industries") {
  const auto f = fixture();
  const auto S = compute_incomplete_control(compute_shares(f.panel, f.trade, 3));
  CHECK(*S.values[3] == doctest::Approx(0.45));
  CHECK(*S.values[4] == doctest::Approx(0.20));
  CHECK_FALSE(S.values[0].has_value());
}

TEST_CASE("instrument is the share-weighted sum of shocks over the industry set") {
  const auto f = fixture();
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  const auto minerals = resolve_industry_set("minerals", s);
  REQUIRE(minerals.size() == 2);
  const Instrument z = build_instrument(s, f.shocks, minerals, "z");
  CHECK(*z.values[3] == doctest::Approx(0.10 * 2.0 + 0.30 * -1.0));
  CHECK(*z.values[4] == doctest::Approx(0.20 * 2.0));
  CHECK_FALSE(z.values[0].has_value());

  const auto all = resolve_industry_set("all", s);
  const Instrument za = build_instrument(s, f.shocks, all, "za");
  CHECK(*za.values[3] == doctest::Approx(0.10 * 2.0 - 0.30 + 0.05 * 4.0));

  // one industry, unit shock: z equals the share
  ShockSeries unit;
  unit.set_value({IndustryId("26"), PeriodId{2003}}, 1.0);
  const std::vector<IndustryId> k26{IndustryId("26")};
  CHECK(*build_instrument(s, unit, k26).values[3] == doctest::Approx(0.10));
  CHECK_THROWS_AS(build_instrument(s, f.shocks, std::vector<IndustryId>{}), ValidationError);
}

TEST_CASE("missing shocks follow the chosen policy") {
  auto f = fixture();
  f.shocks.set_value({IndustryId("27"), PeriodId{2003}}, std::nullopt);
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  const auto minerals = resolve_industry_set("minerals", s);
  const Instrument zero = build_instrument(s, f.shocks, minerals, "z", MissingShockPolicy::zero);
  CHECK(*zero.values[3] == doctest::Approx(0.20));
  CHECK(zero.missing_shock_terms == 1);
  const Instrument drop = build_instrument(s, f.shocks, minerals, "z", MissingShockPolicy::drop);
  CHECK_FALSE(drop.values[3].has_value());
  CHECK(drop.values[4].has_value());
}

TEST_CASE("industry set names resolve against the share panel") {
  const auto f = fixture();
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  CHECK(resolve_industry_set("nonminerals", s) == std::vector<IndustryId>{IndustryId("01")});
  CHECK(resolve_industry_set("hs27", s) == std::vector<IndustryId>{IndustryId("27")});
  CHECK(resolve_industry_set("hs:26:01", s) == std::vector<IndustryId>{IndustryId("01"), IndustryId("26")});
  CHECK_THROWS_AS(resolve_industry_set("hs99", s), ValidationError);
  CHECK_THROWS_AS(resolve_industry_set("metals", s), ValidationError);
}

TEST_CASE("importance weights average shares over locations") {
  const auto f = fixture();
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  const ShockSeries w = importance_weights(s, f.shocks);
  // only AGO has shares in 2003 and 2004
  CHECK(w.weight({IndustryId("27"), PeriodId{2003}}) == doctest::Approx(0.30));
  CHECK(w.weight({IndustryId("26"), PeriodId{2004}}) == doctest::Approx(0.20));
  const ShockSeries pooled = importance_weights(s, f.shocks, WeightAveraging::pooled);
  CHECK(pooled.weight({IndustryId("26"), PeriodId{2003}}) == doctest::Approx(0.15));
  CHECK(pooled.weight({IndustryId("26"), PeriodId{2004}}) == doctest::Approx(0.15));
}

TEST_CASE("share panel round trips through the wide panel format") {
  const auto f = fixture();
  const SharePanel s = compute_shares(f.panel, f.trade, 3);
  const SharePanel back = shares_from_panel(shares_as_panel(s), 3);
  CHECK(back.industries == s.industries);
  CHECK(back.present == s.present);
  CHECK(back.values.isApprox(s.values));
}
