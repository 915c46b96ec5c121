#include "ssiv/pipeline.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "ssiv/error.hpp"

namespace ssiv {

EstimationSpec read_estimation_spec(const KeyValueConfig& kv) {
  EstimationSpec s;
  RegressionSpec& r = s.regression;
  r.outcome = kv.get_string("outcome");
  r.endogenous = kv.get_list("endogenous");
  r.instruments = kv.get_list("instruments");
  s.instrument_sets = kv.get_list("instrument_sets");
  if (!r.instruments.empty() && !s.instrument_sets.empty()) {
    throw ValidationError(kv.source() + ": give either instruments or instrument_sets, not both");
  }
  r.controls = kv.get_list("controls");
  r.lagged_outcome_control = kv.get_bool("lagged_outcome_control", false);
  r.lagged_outcome_in_first_stage = kv.get_bool("lagged_outcome_in_first_stage", true);
  r.location_fe = kv.get_bool("location_fe", true);
  r.period_fe = kv.get_bool("period_fe", true);
  const std::string share_control = kv.get_string("share_control", "none");
  if (share_control == "auto") {
    s.auto_share_control = true;
    r.share_control = "share_total";
  } else if (share_control != "none") {
    r.share_control = share_control;
  }
  r.vcov = parse_vcov_kind(kv.get_string("vcov", "classical"));
  r.cluster_column = kv.get_string("cluster", r.vcov == VcovKind::cluster ? "location" : "");
  r.small_sample_correction = kv.get_bool("small_sample_correction", true);
  r.normalized = kv.get_list("normalize");
  r.normalization = kv.get_double("normalization", r.normalization);

  const std::string ec = kv.get_string("exposure_cluster", "industry");
  if (ec == "industry") {
    s.exposure_cluster = ShockCluster::industry;
  } else if (ec == "mineral_group") {
    s.exposure_cluster = ShockCluster::mineral_group;
  } else if (ec == "shock") {
    s.exposure_cluster = ShockCluster::shock;
  } else {
    throw ValidationError(kv.source() + ": unknown exposure_cluster '" + ec + "'");
  }
  const std::string policy = kv.get_string("missing_shocks", "zero");
  if (policy == "zero") {
    s.missing_shocks = MissingShockPolicy::zero;
  } else if (policy == "drop") {
    s.missing_shocks = MissingShockPolicy::drop;
  } else {
    throw ValidationError(kv.source() + ": unknown missing_shocks policy '" + policy + "'");
  }
  s.report_ols = kv.get_bool("report_ols", false);
  for (double lag : kv.get_double_list("falsify_lags")) {
    if (lag < 1 || lag != std::floor(lag)) throw ValidationError(kv.source() + ": falsify_lags must be positive integers");
    s.falsify_lags.push_back(static_cast<int>(lag));
  }
  s.share_lag = static_cast<int>(kv.get_int("share_lag", 3));
  kv.reject_unused();

  if (!s.instrument_sets.empty()) {
    for (const auto& set : s.instrument_sets) r.instruments.push_back("z_" + set);
  }
  r.check();
  if (r.vcov == VcovKind::exposure && s.instrument_sets.empty()) {
    throw ValidationError(kv.source() + ": exposure-robust inference needs instrument_sets");
  }
  return s;
}

PreparedData prepare(const EstimationSpec& spec, PanelDataset panel, std::optional<SharePanel> shares,
                     std::optional<ShockSeries> shocks) {
  PreparedData out;
  out.spec = spec.regression;
  out.exposure_cluster = spec.exposure_cluster;
  const bool need_shares = !spec.instrument_sets.empty() || spec.auto_share_control;
  if (need_shares && !shares) throw ValidationError("this estimation needs a share panel (--shares)");
  if (!spec.instrument_sets.empty() && !shocks) throw ValidationError("this estimation needs shocks (--shocks)");

  if (shares) {
    if (shares->lag_applied != spec.share_lag) {
      throw ValidationError("share panel was built with lag " + std::to_string(shares->lag_applied) +
                            " but the estimation file asks for " + std::to_string(spec.share_lag));
    }
    out.shares = shares->aligned_to(panel);
  }
  if (shocks) out.shocks = std::move(*shocks);

  for (const auto& set : spec.instrument_sets) {
    auto industries = resolve_industry_set(set, *out.shares);
    Instrument z = build_instrument(*out.shares, out.shocks, industries, "z_" + set, spec.missing_shocks);
    out.missing_shock_terms += z.missing_shock_terms;
    if (panel.has_column(z.name)) throw ValidationError("panel already has a column named " + z.name);
    panel = panel.with_column(z.name, std::move(z.values));
    out.industry_sets.push_back(std::move(industries));
  }
  if (spec.auto_share_control) {
    panel = panel.with_column("share_total", compute_incomplete_control(*out.shares).values);
  }
  out.panel = std::move(panel);
  return out;
}

namespace {

ShockIVOptions shock_options(const PreparedData& d) {
  ShockIVOptions o;
  o.cluster = d.exposure_cluster;
  o.small_sample_correction = d.spec.small_sample_correction;
  return o;
}

}  // namespace

IVEstimate run_iv(const PreparedData& data, int outcome_lag) {
  RegressionSpec spec = data.spec;
  spec.outcome_lag += outcome_lag;
  if (spec.vcov != VcovKind::exposure) return estimate_2sls(data.panel, spec);
  if (!data.shares || data.industry_sets.empty()) {
    throw ValidationError("exposure-robust inference needs shares, shocks and instrument sets");
  }
  const ResidualizedDesign design = absorb(data.panel, spec);
  return estimate_exposure_robust(design, *data.shares, data.shocks, data.industry_sets, shock_options(data));
}

IVEstimate run_ols(const PreparedData& data) {
  RegressionSpec spec = data.spec;
  // OLS has no shock-level counterpart; report robust errors in that case.
  if (spec.vcov == VcovKind::exposure) spec.vcov = VcovKind::robust;
  return estimate_ols(data.panel, spec);
}

EquivalenceReport equivalence_check(const PreparedData& data) {
  if (!data.shares || data.industry_sets.empty()) {
    throw ValidationError("equivalence check needs shares, shocks and instrument sets");
  }
  RegressionSpec spec = data.spec;
  if (spec.vcov == VcovKind::exposure) spec.vcov = VcovKind::classical;
  const ResidualizedDesign design = absorb(data.panel, spec);
  EquivalenceReport r;
  r.location = estimate_2sls(design);
  const ShockLevelDesign sd = to_shock_level(design, *data.shares, data.shocks, data.industry_sets);
  r.shock = estimate_shock_level_iv(sd, shock_options(data));
  for (Eigen::Index j = 0; j < r.location.beta.size(); ++j) {
    const double denom = std::max(std::fabs(r.location.beta(j)), 1e-300);
    r.max_relative_gap = std::max(r.max_relative_gap, std::fabs(r.shock.beta(j) - r.location.beta(j)) / denom);
  }
  r.orthogonality = orthogonality_check(design, sd, r.location.beta);
  r.shock_rows = sd.rows();
  r.zero_exposure = sd.zero_exposure.size();
  return r;
}

std::string significance_stars(double p) {
  if (!(p >= 0.0)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

nlohmann::ordered_json estimate_json(const LabeledEstimate& c) {
  const IVEstimate& e = c.estimate;
  nlohmann::ordered_json j;
  j["label"] = c.label;
  j["method"] = e.method;
  j["vcov"] = std::string(to_string(e.vcov_kind));
  if (!e.cluster_label.empty()) j["cluster"] = e.cluster_label;
  j["n_obs"] = e.n_obs;
  j["n_params"] = e.n_params;
  if (e.n_clusters > 0) j["n_clusters"] = e.n_clusters;
  j["df"] = e.df();
  j["coefficients"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < e.names.size(); ++i) {
    nlohmann::ordered_json row;
    row["name"] = e.names[i];
    row["beta"] = e.beta(static_cast<Eigen::Index>(i));
    row["se"] = e.se(static_cast<Eigen::Index>(i));
    row["t"] = e.t_stat(i);
    row["p"] = e.p_value(i);
    if (i < e.first_stage_f.size()) row["first_stage_F"] = e.first_stage_f[i];
    j["coefficients"].push_back(row);
  }
  return j;
}

}  // namespace

void write_estimates(std::ostream& out, const std::vector<LabeledEstimate>& columns, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: {
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& c : columns) j.push_back(estimate_json(c));
      out << j.dump(2) << '\n';
      return;
    }
    case ReportFormat::csv:
      out << "label,method,vcov,name,beta,se,t,p,first_stage_F,n_obs,n_clusters\n";
      for (const auto& c : columns) {
        const IVEstimate& e = c.estimate;
        for (std::size_t i = 0; i < e.names.size(); ++i) {
          const auto k = static_cast<Eigen::Index>(i);
          out << c.label << ',' << e.method << ',' << to_string(e.vcov_kind) << ',' << e.names[i] << ','
              << format_real(e.beta(k)) << ',' << format_real(e.se(k)) << ',' << format_real(e.t_stat(i)) << ','
              << format_real(e.p_value(i)) << ','
              << (i < e.first_stage_f.size() ? format_real(e.first_stage_f[i]) : std::string()) << ',' << e.n_obs
              << ',' << e.n_clusters << '\n';
        }
      }
      return;
    case ReportFormat::text:
      break;
  }

  std::vector<std::string> names;
  for (const auto& c : columns) {
    for (const auto& n : c.estimate.names) {
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
    }
  }
  constexpr int lw = 22, cw = 16;
  out << std::left << std::setw(lw) << "";
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out << std::right << std::setw(cw) << ("(" + std::to_string(c + 1) + ") " + columns[c].label);
  }
  out << '\n';
  for (const auto& n : names) {
    out << std::left << std::setw(lw) << n;
    for (const auto& c : columns) {
      const auto& e = c.estimate;
      auto it = std::find(e.names.begin(), e.names.end(), n);
      if (it == e.names.end()) {
        out << std::setw(cw) << "";
        continue;
      }
      const auto i = static_cast<std::size_t>(it - e.names.begin());
      out << std::right << std::setw(cw)
          << fixed(e.beta(static_cast<Eigen::Index>(i)), 3) + significance_stars(e.p_value(i));
    }
    out << '\n' << std::left << std::setw(lw) << "";
    for (const auto& c : columns) {
      const auto& e = c.estimate;
      auto it = std::find(e.names.begin(), e.names.end(), n);
      if (it == e.names.end()) {
        out << std::setw(cw) << "";
        continue;
      }
      const auto i = static_cast<Eigen::Index>(it - e.names.begin());
      out << std::right << std::setw(cw) << "(" + fixed(e.se(i), 3) + ")";
    }
    out << '\n';
  }
  out << std::left << std::setw(lw) << "First-stage F";
  for (const auto& c : columns) {
    std::string f;
    for (double v : c.estimate.first_stage_f) f += (f.empty() ? "" : "/") + fixed(v, 2);
    out << std::right << std::setw(cw) << f;
  }
  out << '\n' << std::left << std::setw(lw) << "Observations";
  for (const auto& c : columns) out << std::right << std::setw(cw) << c.estimate.n_obs;
  out << '\n' << std::left << std::setw(lw) << "Inference";
  for (const auto& c : columns) {
    std::string v(to_string(c.estimate.vcov_kind));
    if (c.estimate.n_clusters > 0) v += " G=" + std::to_string(c.estimate.n_clusters);
    out << std::right << std::setw(cw) << v;
  }
  out << "\n*** p<0.01, ** p<0.05, * p<0.1\n";
}

void write_equivalence(std::ostream& out, const EquivalenceReport& r, ReportFormat format) {
  if (format == ReportFormat::json) {
    nlohmann::ordered_json j;
    j["location_beta"] = std::vector<double>(r.location.beta.data(), r.location.beta.data() + r.location.beta.size());
    j["shock_beta"] = std::vector<double>(r.shock.beta.data(), r.shock.beta.data() + r.shock.beta.size());
    j["max_relative_gap"] = r.max_relative_gap;
    j["orthogonality_gap"] = r.orthogonality.max_relative_gap;
    j["shock_rows"] = r.shock_rows;
    j["zero_exposure_dropped"] = r.zero_exposure;
    out << j.dump(2) << '\n';
    return;
  }
  if (format == ReportFormat::csv) {
    out << "name,location_beta,shock_beta\n";
    for (std::size_t i = 0; i < r.location.names.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out << r.location.names[i] << ',' << format_real(r.location.beta(k)) << ',' << format_real(r.shock.beta(k))
          << '\n';
    }
    return;
  }
  out << std::left << std::setw(22) << "coefficient" << std::right << std::setw(18) << "location-level"
      << std::setw(18) << "shock-level" << '\n';
  out << std::setprecision(10);
  for (std::size_t i = 0; i < r.location.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << std::left << std::setw(22) << r.location.names[i] << std::right << std::setw(18) << r.location.beta(k)
        << std::setw(18) << r.shock.beta(k) << '\n';
  }
  out << std::setprecision(3) << std::scientific << "max relative gap " << r.max_relative_gap
      << "\northogonality gap " << r.orthogonality.max_relative_gap << '\n'
      << std::defaultfloat << std::setprecision(6) << "shock-level rows " << r.shock_rows << " (" << r.zero_exposure
      << " zero-exposure industry-periods dropped)\n";
}

}  // namespace ssiv
