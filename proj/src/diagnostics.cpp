#include "ssiv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ssiv/error.hpp"
#include "ssiv/numeric.hpp"

namespace ssiv {

double weighted_quantile(std::span<const double> values, std::span<const double> weights, double q) {
  if (values.empty() || values.size() != weights.size()) throw ValidationError("weighted_quantile: bad input");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });

  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ValidationError("weighted_quantile: weights sum to zero");

  std::vector<double> pos, val;
  double cum = 0.0;
  for (auto i : order) {
    if (weights[i] <= 0.0) continue;
    pos.push_back((cum + 0.5 * weights[i]) / total);
    val.push_back(values[i]);
    cum += weights[i];
  }
  if (q <= pos.front()) return val.front();
  if (q >= pos.back()) return val.back();
  auto it = std::upper_bound(pos.begin(), pos.end(), q);
  const auto hi = static_cast<std::size_t>(it - pos.begin());
  const auto lo = hi - 1;
  const double t = (q - pos[lo]) / (pos[hi] - pos[lo]);
  return val[lo] + t * (val[hi] - val[lo]);
}

ShockSummary shock_summary(const ShockSeries& shocks, bool residualize_on_period,
                           std::optional<std::span<const IndustryId>> industries) {
  std::set<IndustryId> keep;
  if (industries) keep.insert(industries->begin(), industries->end());

  std::vector<ShockKey> keys;
  std::vector<double> g, w;
  for (const auto& [key, entry] : shocks.entries()) {
    if (industries && !keep.contains(key.industry)) continue;
    if (!entry.value || !(entry.weight > 0.0)) continue;
    keys.push_back(key);
    g.push_back(*entry.value);
    w.push_back(entry.weight);
  }
  if (keys.empty()) throw ValidationError("shock summary: empty shock series");

  const double total = exact_sum(w);
  for (double& x : w) x /= total;

  if (residualize_on_period) {
    std::map<PeriodId, std::pair<double, double>> acc;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      auto& [sw, swg] = acc[keys[i].period];
      sw += w[i];
      swg += w[i] * g[i];
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& [sw, swg] = acc.at(keys[i].period);
      g[i] -= swg / sw;
    }
  }

  ShockSummary s;
  s.residualized = residualize_on_period;
  s.n_shocks = keys.size();
  std::set<IndustryId> seen;
  double hhi = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    seen.insert(keys[i].industry);
    s.mean += w[i] * g[i];
    hhi += w[i] * w[i];
    s.largest_weight = std::max(s.largest_weight, w[i]);
  }
  s.n_industries = seen.size();
  s.effective_shocks = 1.0 / hhi;
  double var = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) var += w[i] * (g[i] - s.mean) * (g[i] - s.mean);
  s.sd = std::sqrt(std::max(var, 0.0));
  s.iqr = weighted_quantile(g, w, 0.75) - weighted_quantile(g, w, 0.25);
  return s;
}

namespace {

SummaryRow summarize(std::string variable, std::string group, const std::vector<double>& v) {
  SummaryRow row{std::move(variable), std::move(group)};
  row.n = v.size();
  if (v.empty()) return row;
  row.mean = exact_sum(v) / static_cast<double>(v.size());
  row.min = *std::min_element(v.begin(), v.end());
  row.max = *std::max_element(v.begin(), v.end());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - row.mean) * (x - row.mean);
    row.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return row;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

OutcomeSummary outcome_summary(const PanelDataset& panel, const std::string& split_column) {
  (void)panel.column(split_column);
  for (auto c : {col::incidence, col::conflicts, col::fatalities}) (void)panel.column(c);

  OutcomeSummary out;
  out.split_column = split_column;

  std::vector<double> split_values;
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    if (auto v = panel.value(split_column, r)) split_values.push_back(*v);
  }
  if (split_values.empty()) throw ValidationError("split column '" + split_column + "' has no values");
  out.median = median_of(split_values);

  const std::vector<std::string_view> variables{col::incidence, col::conflicts, col::fatalities};
  for (auto var : variables) {
    std::vector<double> all, above, below;
    for (std::size_t r = 0; r < panel.rows(); ++r) {
      auto v = panel.value(var, r);
      if (!v) continue;
      if (var != col::incidence) {
        auto events = panel.value(col::conflicts, r);
        if (!events || *events < 1.0) continue;
      }
      all.push_back(*v);
      auto s = panel.value(split_column, r);
      if (!s) continue;
      (*s > out.median ? above : below).push_back(*v);
    }
    out.rows.push_back(summarize(std::string(var), "all", all));
    out.rows.push_back(summarize(std::string(var), "above_median", above));
    out.rows.push_back(summarize(std::string(var), "below_median", below));
    if (var == col::incidence) out.degenerate_split = above.empty() || below.empty();
  }
  return out;
}

Concentration exporter_concentration(std::span<const TradeRecord> world, int year, std::size_t top_n) {
  std::map<LocationId, ExactSum> by_country;
  ExactSum total;
  bool year_seen = false;
  for (const auto& r : world) {
    if (r.period.year != year) continue;
    year_seen = true;
    if (!is_mineral(r.industry)) continue;
    by_country[r.exporter].add(r.export_value);
    total.add(r.export_value);
  }
  if (!year_seen) throw ValidationError("no trade records for year " + std::to_string(year));

  Concentration c;
  c.year = year;
  c.world_total = total.value();
  if (!(c.world_total > 0.0)) throw ValidationError("no mineral exports in year " + std::to_string(year));

  std::vector<ExporterShare> all;
  for (const auto& [l, sum] : by_country) {
    const double x = sum.value();
    all.push_back({l, x, x / c.world_total});
  }
  c.n_exporters = all.size();
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.exports > b.exports; });
  if (all.size() > top_n) all.erase(all.begin() + static_cast<std::ptrdiff_t>(top_n), all.end());
  c.top = std::move(all);
  ExactSum top;
  for (const auto& e : c.top) top.add(e.share);
  c.top_share = top.value();
  return c;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "text") return ReportFormat::text;
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw ValidationError("unknown format '" + std::string(s) + "' (expected text, json or csv)");
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

void write_report(std::ostream& out, const ShockSummary& s, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: {
      nlohmann::ordered_json j;
      j["mean"] = s.mean;
      j["sd"] = s.sd;
      j["iqr"] = s.iqr;
      j["n_shocks"] = s.n_shocks;
      j["n_industries"] = s.n_industries;
      j["effective_shocks"] = s.effective_shocks;
      j["largest_weight"] = s.largest_weight;
      j["residualized"] = s.residualized;
      out << j.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << "mean,sd,iqr,n_shocks,n_industries,effective_shocks,largest_weight,residualized\n"
          << format_real(s.mean) << ',' << format_real(s.sd) << ',' << format_real(s.iqr) << ',' << s.n_shocks
          << ',' << s.n_industries << ',' << format_real(s.effective_shocks) << ','
          << format_real(s.largest_weight) << ',' << (s.residualized ? "yes" : "no") << '\n';
      break;
    case ReportFormat::text:
      out << std::left << std::setw(36) << "Mean" << std::right << std::setw(14) << fixed(s.mean, 3) << '\n'
          << std::left << std::setw(36) << "Standard deviation" << std::right << std::setw(14) << fixed(s.sd, 3)
          << '\n'
          << std::left << std::setw(36) << "Interquartile range" << std::right << std::setw(14) << fixed(s.iqr, 3)
          << '\n'
          << std::left << std::setw(36) << "Effective number of shocks (1/HHI)" << std::right << std::setw(14)
          << fixed(s.effective_shocks, 2) << '\n'
          << std::left << std::setw(36) << "Largest s_kt weight" << std::right << std::setw(14)
          << fixed(s.largest_weight, 3) << '\n'
          << std::left << std::setw(36) << "Number of industry-period shocks" << std::right << std::setw(14)
          << s.n_shocks << '\n'
          << std::left << std::setw(36) << "Number of industries (HS2)" << std::right << std::setw(14)
          << s.n_industries << '\n'
          << std::left << std::setw(36) << "Residualizing on period FE" << std::right << std::setw(14)
          << (s.residualized ? "Yes" : "No") << '\n';
      break;
  }
}

void write_report(std::ostream& out, const OutcomeSummary& s, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: {
      nlohmann::ordered_json j;
      j["split_column"] = s.split_column;
      j["median"] = s.median;
      j["degenerate_split"] = s.degenerate_split;
      j["rows"] = nlohmann::ordered_json::array();
      for (const auto& r : s.rows) {
        nlohmann::ordered_json row;
        row["variable"] = r.variable;
        row["group"] = r.group;
        row["n"] = r.n;
        row["mean"] = r.mean;
        row["sd"] = r.sd;
        row["min"] = r.min;
        row["max"] = r.max;
        j["rows"].push_back(row);
      }
      out << j.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << "variable,group,n,mean,sd,min,max\n";
      for (const auto& r : s.rows) {
        out << r.variable << ',' << r.group << ',' << r.n << ',' << format_real(r.mean) << ',' << format_real(r.sd)
            << ',' << format_real(r.min) << ',' << format_real(r.max) << '\n';
      }
      break;
    case ReportFormat::text:
      out << "Split on " << s.split_column << " (median " << format_real(s.median) << ")"
          << (s.degenerate_split ? " [degenerate split]" : "") << '\n';
      out << std::left << std::setw(14) << "variable" << std::setw(14) << "group" << std::right << std::setw(8) << "N"
          << std::setw(12) << "mean" << std::setw(12) << "sd" << std::setw(10) << "min" << std::setw(10) << "max"
          << '\n';
      for (const auto& r : s.rows) {
        out << std::left << std::setw(14) << r.variable << std::setw(14) << r.group << std::right << std::setw(8)
            << r.n << std::setw(12) << fixed(r.mean, 2) << std::setw(12) << fixed(r.sd, 2) << std::setw(10)
            << fixed(r.min, 0) << std::setw(10) << fixed(r.max, 0) << '\n';
      }
      break;
  }
}

void write_report(std::ostream& out, const Concentration& c, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: {
      nlohmann::ordered_json j;
      j["year"] = c.year;
      j["world_total"] = c.world_total;
      j["n_exporters"] = c.n_exporters;
      j["top_share"] = c.top_share;
      j["top"] = nlohmann::ordered_json::array();
      for (const auto& e : c.top) {
        j["top"].push_back({{"exporter", e.exporter.code()}, {"exports", e.exports}, {"share", e.share}});
      }
      out << j.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << "rank,exporter,exports,share\n";
      for (std::size_t i = 0; i < c.top.size(); ++i) {
        out << i + 1 << ',' << c.top[i].exporter.code() << ',' << format_real(c.top[i].exports) << ','
            << format_real(c.top[i].share) << '\n';
      }
      break;
    case ReportFormat::text:
      out << "Top mineral exporters, " << c.year << '\n';
      for (std::size_t i = 0; i < c.top.size(); ++i) {
        out << std::right << std::setw(3) << i + 1 << "  " << c.top[i].exporter.code() << std::setw(10)
            << fixed(100.0 * c.top[i].share, 2) << "%\n";
      }
      out << "     Top " << c.top.size() << std::setw(8) << fixed(100.0 * c.top_share, 2) << "%\n";
      break;
  }
}

}  // namespace ssiv
