#include <cmath>
#include <sstream>

#include "doctest.h"
#include "ssiv/diagnostics.hpp"
#include "ssiv/error.hpp"

using namespace ssiv;

namespace {

ShockSeries series(const std::vector<std::tuple<const char*, int, double, double>>& rows) {
  ShockSeries s;
  for (const auto& [k, y, g, w] : rows) {
    s.set_value({IndustryId(k), PeriodId{y}}, g);
    s.set_weight({IndustryId(k), PeriodId{y}}, w);
  }
  return s;
}

}  // namespace

TEST_CASE("equal weights give one effective shock per entry") {
  ShockSeries s;
  int n = 0;
  for (const char* k : {"25", "26", "27"})
    for (int y = 2000; y < 2017; ++y, ++n) {
      s.set_value({IndustryId(k), PeriodId{y}}, n * 0.1);
      s.set_weight({IndustryId(k), PeriodId{y}}, 0.3);
    }
  const ShockSummary r = shock_summary(s, false);
  CHECK(r.n_shocks == 51);
  CHECK(r.n_industries == 3);
  CHECK(r.effective_shocks == doctest::Approx(51.0).epsilon(1e-12));
  CHECK(r.largest_weight == doctest::Approx(1.0 / 51.0));
  CHECK(r.mean == doctest::Approx(2.5));
}

TEST_CASE("weighted moments by hand") {
  const ShockSeries s = series({{"25", 2000, 1.0, 1.0}, {"26", 2000, 3.0, 3.0}, {"25", 2001, -2.0, 4.0},
                                {"26", 2001, 5.0, 0.0}});
  const ShockSummary r = shock_summary(s, false);
  // weights 1/8, 3/8, 4/8; zero-weight entry ignored
  CHECK(r.n_shocks == 3);
  CHECK(r.mean == doctest::Approx((1.0 + 9.0 - 8.0) / 8.0));
  const double m = 0.25;
  const double var = (1.0 * std::pow(1 - m, 2) + 3.0 * std::pow(3 - m, 2) + 4.0 * std::pow(-2 - m, 2)) / 8.0;
  CHECK(r.sd == doctest::Approx(std::sqrt(var)));
  CHECK(r.effective_shocks == doctest::Approx(1.0 / ((1.0 + 9.0 + 16.0) / 64.0)));
  CHECK(r.largest_weight == doctest::Approx(0.5));

  // rescaling all weights changes nothing
  const ShockSeries scaled = series({{"25", 2000, 1.0, 10.0}, {"26", 2000, 3.0, 30.0}, {"25", 2001, -2.0, 40.0}});
  const ShockSummary r2 = shock_summary(scaled, false);
  CHECK(r2.mean == doctest::Approx(r.mean));
  CHECK(r2.sd == doctest::Approx(r.sd));
  CHECK(r2.effective_shocks == doctest::Approx(r.effective_shocks));
}

TEST_CASE("period residualization removes period means") {
  const ShockSeries s = series({{"25", 2000, 1.0, 1.0}, {"26", 2000, 3.0, 1.0}, {"25", 2001, 10.0, 2.0},
                                {"26", 2001, 20.0, 2.0}});
  const ShockSummary r = shock_summary(s, true);
  CHECK(r.residualized);
  CHECK(std::abs(r.mean) < 1e-12);
  // residuals -1, 1, -5, 5 with weights 1,1,2,2 over 6
  CHECK(r.sd == doctest::Approx(std::sqrt((1.0 + 1.0 + 50.0 + 50.0) / 6.0)));
}

TEST_CASE("industry filter and empty series") {
  const ShockSeries s = series({{"25", 2000, 1.0, 1.0}, {"01", 2000, 3.0, 1.0}});
  const std::vector<IndustryId> only{IndustryId("01")};
  CHECK(shock_summary(s, false, std::span<const IndustryId>(only)).mean == doctest::Approx(3.0));
  CHECK_THROWS_AS(shock_summary(ShockSeries{}, false), ValidationError);
  const std::vector<IndustryId> none{IndustryId("99")};
  CHECK_THROWS_AS(shock_summary(s, false, std::span<const IndustryId>(none)), ValidationError);
}

TEST_CASE("weighted quantiles interpolate between midpoints") {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  const std::vector<double> w{1.0, 1.0, 1.0, 1.0};
  // sorted 1..4 at CDF midpoints 0.125, 0.375, 0.625, 0.875
  CHECK(weighted_quantile(v, w, 0.5) == doctest::Approx(2.5));
  CHECK(weighted_quantile(v, w, 0.25) == doctest::Approx(1.5));
  CHECK(weighted_quantile(v, w, 0.75) == doctest::Approx(3.5));
  CHECK(weighted_quantile(v, w, 0.0) == 1.0);
  CHECK(weighted_quantile(v, w, 1.0) == 4.0);
  const std::vector<double> heavy{1.0, 1.0, 1.0, 5.0};
  // sorted weights 1,5,1,1 put midpoints at 1/16, 7/16, 13/16, 15/16
  CHECK(weighted_quantile(v, heavy, 0.5) == doctest::Approx(2.0 + (0.5 - 7.0 / 16.0) / (6.0 / 16.0)));
}

TEST_CASE("outcome summary splits at the median") {
  const std::vector<Cell> cells{{LocationId("AAA"), PeriodId{2000}}, {LocationId("AAA"), PeriodId{2001}},
                                {LocationId("BBB"), PeriodId{2000}}, {LocationId("BBB"), PeriodId{2001}}};
  const PanelDataset p(cells, {{std::string(col::incidence), RealSeries{1.0, 0.0, 1.0, 1.0}},
                               {std::string(col::conflicts), RealSeries{2.0, 0.0, 4.0, 9.0}},
                               {std::string(col::fatalities), RealSeries{10.0, 0.0, 0.0, 30.0}},
                               {"trade", RealSeries{1.0, 2.0, 3.0, 4.0}}});
  const OutcomeSummary r = outcome_summary(p, "trade");
  CHECK(r.median == doctest::Approx(2.5));
  CHECK_FALSE(r.degenerate_split);
  auto find = [&](const std::string& var, const std::string& group) {
    for (const auto& row : r.rows)
      if (row.variable == var && row.group == group) return row;
    FAIL("missing row " << var << " " << group);
    return SummaryRow{};
  };
  const SummaryRow inc = find(std::string(col::incidence), "all");
  CHECK(inc.n == 4);
  CHECK(inc.mean == doctest::Approx(0.75));
  CHECK(inc.sd == doctest::Approx(0.5));
  const SummaryRow conf = find(std::string(col::conflicts), "all");
  CHECK(conf.n == 3);
  CHECK(conf.mean == doctest::Approx(5.0));
  CHECK(conf.min == 2.0);
  CHECK(conf.max == 9.0);
  const SummaryRow above = find(std::string(col::conflicts), "above_median");
  CHECK(above.n == 2);
  CHECK(above.mean == doctest::Approx(6.5));
  const SummaryRow below = find(std::string(col::fatalities), "below_median");
  CHECK(below.n == 1);
  CHECK(below.mean == doctest::Approx(10.0));
}

TEST_CASE("exporter concentration") {
  auto rec = [](const char* l, const char* k, int y, double v) {
    return TradeRecord{LocationId(l), IndustryId(k), PeriodId{y}, v};
  };
  SUBCASE("monopoly") {
    const std::vector<TradeRecord> w{rec("AGO", "27", 2010, 5.0), rec("BEN", "01", 2010, 100.0)};
    const Concentration c = exporter_concentration(w, 2010);
    REQUIRE(c.top.size() == 1);
    CHECK(c.top[0].share == 1.0);
    CHECK(c.world_total == 5.0);
  }
  SUBCASE("shares sum to one and rank descending") {
    std::vector<TradeRecord> w;
    const char* codes[] = {"AAA", "BBB", "CCC", "DDD", "EEE", "FFF", "GGG", "HHH", "III", "JJJ", "KKK", "LLL"};
    for (int i = 0; i < 12; ++i) {
      w.push_back(rec(codes[i], "26", 2005, 1.0 + (i % 5)));
      w.push_back(rec(codes[i], "25", 2005, 0.5));
      w.push_back(rec(codes[i], "26", 2006, 99.0));
    }
    const Concentration all = exporter_concentration(w, 2005, 100);
    CHECK(all.n_exporters == 12);
    double total = 0.0;
    for (const auto& e : all.top) total += e.share;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 1; i < all.top.size(); ++i) {
      CHECK(all.top[i - 1].share >= all.top[i].share);
      if (all.top[i - 1].share == all.top[i].share) CHECK(all.top[i - 1].exporter < all.top[i].exporter);
    }
    const Concentration top3 = exporter_concentration(w, 2005, 3);
    CHECK(top3.top.size() == 3);
    CHECK(top3.top[0].exporter == LocationId("EEE"));
    // 5.5 twice, then 4.5
    CHECK(top3.top_share == doctest::Approx((5.5 + 5.5 + 4.5) / all.world_total));
  }
  SUBCASE("year without mineral trade") {
    const std::vector<TradeRecord> w{rec("AGO", "01", 2010, 5.0)};
    CHECK_THROWS_AS(exporter_concentration(w, 2010), ValidationError);
  }
}

TEST_CASE("reports render in every format") {
  const ShockSeries s = series({{"25", 2000, 1.0, 1.0}, {"26", 2000, 3.0, 1.0}});
  const ShockSummary r = shock_summary(s, false);
  for (const char* f : {"text", "json", "csv"}) {
    std::ostringstream out;
    write_report(out, r, parse_report_format(f));
    CHECK_FALSE(out.str().empty());
  }
  CHECK_THROWS_AS(parse_report_format("xml"), ValidationError);
}
