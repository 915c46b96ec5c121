#include "ssiv/shiftshare.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ssiv/error.hpp"
#include "ssiv/numeric.hpp"

namespace ssiv {

std::optional<std::size_t> SharePanel::industry_index(const IndustryId& k) const {
  auto it = std::lower_bound(industries.begin(), industries.end(), k);
  if (it == industries.end() || *it != k) return std::nullopt;
  return static_cast<std::size_t>(it - industries.begin());
}

std::optional<double> SharePanel::share(std::size_t row, const IndustryId& k) const {
  if (!present.at(row)) return std::nullopt;
  auto j = industry_index(k);
  if (!j) return 0.0;
  return values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(*j));
}

SharePanel SharePanel::aligned_to(const PanelDataset& panel) const {
  std::map<Cell, std::size_t> index;
  for (std::size_t r = 0; r < cells.size(); ++r) index.emplace(cells[r], r);

  SharePanel out;
  out.cells = panel.cells();
  out.industries = industries;
  out.lag_applied = lag_applied;
  out.excluded_gdp = excluded_gdp;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(panel.rows()), values.cols());
  out.present.assign(panel.rows(), false);
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    auto it = index.find(panel.cell(r));
    if (it == index.end() || !present[it->second]) continue;
    out.present[r] = true;
    out.values.row(static_cast<Eigen::Index>(r)) = values.row(static_cast<Eigen::Index>(it->second));
  }
  return out;
}

SharePanel compute_shares(const PanelDataset& panel, std::span<const TradeRecord> trade, int lag,
                          std::string_view gdp_column) {
  if (lag < 0) throw ValidationError("share lag must be >= 0");

  std::set<IndustryId> industry_set;
  std::map<Cell, std::vector<std::pair<IndustryId, double>>> exports;
  for (const auto& r : trade) {
    industry_set.insert(r.industry);
    exports[{r.exporter, r.period}].emplace_back(r.industry, r.export_value);
  }

  SharePanel out;
  out.cells = panel.cells();
  out.industries.assign(industry_set.begin(), industry_set.end());
  out.lag_applied = lag;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(panel.rows()),
                                     static_cast<Eigen::Index>(out.industries.size()));
  out.present.assign(panel.rows(), false);

  for (std::size_t r = 0; r < panel.rows(); ++r) {
    const Cell& c = panel.cell(r);
    const Cell source{c.location, PeriodId{c.period.year - lag}};
    auto src_row = panel.find(source.location, source.period);
    if (!src_row) continue;
    auto gdp = panel.value(gdp_column, *src_row);
    if (!gdp) continue;
    if (!(*gdp > 0.0)) {
      out.excluded_gdp.push_back(c);
      continue;
    }
    out.present[r] = true;
    if (auto it = exports.find(source); it != exports.end()) {
      for (const auto& [k, x] : it->second) {
        const auto j = *out.industry_index(k);
        out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = x / *gdp;
      }
    }
  }
  return out;
}

IncompleteShareControl compute_incomplete_control(const SharePanel& shares) {
  IncompleteShareControl out;
  out.cells = shares.cells;
  out.values.resize(shares.rows());
  for (std::size_t r = 0; r < shares.rows(); ++r) {
    if (!shares.present[r]) continue;
    ExactSum s;
    for (Eigen::Index j = 0; j < shares.values.cols(); ++j) s.add(shares.values(static_cast<Eigen::Index>(r), j));
    out.values[r] = s.value();
  }
  return out;
}

Instrument build_instrument(const SharePanel& shares, const ShockSeries& shocks,
                            std::span<const IndustryId> industries, std::string name, MissingShockPolicy policy) {
  if (industries.empty()) throw ValidationError("instrument '" + name + "': empty industry set");

  Instrument z;
  z.name = std::move(name);
  z.industries.assign(industries.begin(), industries.end());
  std::sort(z.industries.begin(), z.industries.end());
  z.industries.erase(std::unique(z.industries.begin(), z.industries.end()), z.industries.end());

  std::vector<std::optional<std::size_t>> idx;
  for (const auto& k : z.industries) idx.push_back(shares.industry_index(k));

  z.values.resize(shares.rows());
  for (std::size_t r = 0; r < shares.rows(); ++r) {
    if (!shares.present[r]) continue;
    const PeriodId t = shares.cells[r].period;
    double sum = 0.0;
    bool dropped = false;
    for (std::size_t i = 0; i < z.industries.size(); ++i) {
      if (!idx[i]) continue;
      const double s = shares.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(*idx[i]));
      if (s == 0.0) continue;
      auto g = shocks.value({z.industries[i], t});
      if (!g) {
        ++z.missing_shock_terms;
        if (policy == MissingShockPolicy::drop) dropped = true;
        continue;
      }
      sum += s * *g;
    }
    if (!dropped) z.values[r] = sum;
  }
  return z;
}

std::vector<IndustryId> resolve_industry_set(std::string_view name, const SharePanel& shares) {
  std::vector<IndustryId> out;
  auto keep = [&](auto pred) {
    for (const auto& k : shares.industries) {
      if (pred(k)) out.push_back(k);
    }
  };
  if (name == "minerals") {
    keep([](const IndustryId& k) { return is_mineral(k); });
  } else if (name == "nonminerals") {
    keep([](const IndustryId& k) { return !is_mineral(k); });
  } else if (name == "all") {
    keep([](const IndustryId&) { return true; });
  } else if (name.substr(0, 3) == "hs:") {
    std::set<IndustryId> wanted;
    std::string_view rest = name.substr(3);
    while (!rest.empty()) {
      auto colon = rest.find(':');
      wanted.insert(IndustryId(rest.substr(0, colon)));
      rest = colon == std::string_view::npos ? std::string_view{} : rest.substr(colon + 1);
    }
    keep([&](const IndustryId& k) { return wanted.contains(k); });
  } else if (name.size() == 4 && name.substr(0, 2) == "hs") {
    const IndustryId target(name.substr(2));
    keep([&](const IndustryId& k) { return k == target; });
  } else {
    throw ValidationError("unknown industry set '" + std::string(name) + "'");
  }
  if (out.empty()) {
    throw ValidationError("industry set '" + std::string(name) + "' matches no industry in the share panel");
  }
  return out;
}

ShockSeries importance_weights(const SharePanel& shares, ShockSeries shocks, WeightAveraging averaging,
                               std::span<const std::size_t> sample_rows) {
  std::vector<std::size_t> rows;
  if (sample_rows.empty()) {
    for (std::size_t r = 0; r < shares.rows(); ++r) {
      if (shares.present[r]) rows.push_back(r);
    }
  } else {
    for (auto r : sample_rows) {
      if (shares.present.at(r)) rows.push_back(r);
    }
  }

  const auto K = static_cast<Eigen::Index>(shares.industries.size());
  std::map<PeriodId, std::pair<Eigen::VectorXd, std::size_t>> by_period;
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(K);
  for (auto r : rows) {
    auto& [sum, n] = by_period.try_emplace(shares.cells[r].period, Eigen::VectorXd::Zero(K), 0).first->second;
    sum += shares.values.row(static_cast<Eigen::Index>(r)).transpose();
    pooled += shares.values.row(static_cast<Eigen::Index>(r)).transpose();
    ++n;
  }
  if (!rows.empty()) pooled /= static_cast<double>(rows.size());

  for (const auto& [t, acc] : by_period) {
    for (Eigen::Index j = 0; j < K; ++j) {
      const ShockKey key{shares.industries[static_cast<std::size_t>(j)], t};
      const double w = averaging == WeightAveraging::per_period ? acc.first(j) / static_cast<double>(acc.second)
                                                                : pooled(j);
      if (!shocks.contains(key)) shocks.set_value(key, std::nullopt);
      shocks.set_weight(key, w);
    }
  }
  return shocks;
}

std::string share_column_name(const IndustryId& k) { return "share_hs" + k.code(); }

PanelDataset shares_as_panel(const SharePanel& shares) {
  std::vector<std::pair<std::string, Column>> columns;
  for (std::size_t j = 0; j < shares.industries.size(); ++j) {
    RealSeries v(shares.rows());
    for (std::size_t r = 0; r < shares.rows(); ++r) {
      if (shares.present[r]) v[r] = shares.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    }
    columns.emplace_back(share_column_name(shares.industries[j]), std::move(v));
  }
  return PanelDataset(shares.cells, std::move(columns));
}

SharePanel shares_from_panel(const PanelDataset& panel, int lag_applied) {
  SharePanel out;
  out.cells = panel.cells();
  out.lag_applied = lag_applied;
  std::vector<std::string> names;
  for (const auto& n : panel.column_names()) {
    if (n.size() == 10 && n.starts_with("share_hs")) {
      out.industries.emplace_back(n.substr(8));
      names.push_back(n);
    }
  }
  std::vector<std::size_t> order(names.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return out.industries[a] < out.industries[b]; });
  std::vector<IndustryId> sorted;
  std::vector<std::string> sorted_names;
  for (auto i : order) {
    sorted.push_back(out.industries[i]);
    sorted_names.push_back(names[i]);
  }
  out.industries = std::move(sorted);

  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(panel.rows()),
                                     static_cast<Eigen::Index>(out.industries.size()));
  out.present.assign(panel.rows(), false);
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    bool all = !sorted_names.empty();
    for (std::size_t j = 0; j < sorted_names.size(); ++j) {
      auto v = panel.value(sorted_names[j], r);
      if (!v) {
        all = false;
        break;
      }
      if (*v < 0.0) throw ValidationError("negative share in column " + sorted_names[j]);
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *v;
    }
    out.present[r] = all;
    if (!all) out.values.row(static_cast<Eigen::Index>(r)).setZero();
  }
  return out;
}

}  // namespace ssiv
