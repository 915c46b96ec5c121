#include "ssiv/shocklevel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "ssiv/error.hpp"
#include "ssiv/ingest.hpp"

namespace ssiv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index idx(std::size_t i) { return static_cast<Index>(i); }

constexpr double kInstrumentMatchTolerance = 1e-10;

}  // namespace

ShockLevelDesign to_shock_level(const ResidualizedDesign& d, const SharePanel& shares, const ShockSeries& shocks,
                                std::span<const std::vector<IndustryId>> instrument_industries) {
  if (!d.residualized) {
    throw ValidationError("shock-level aggregation needs a design residualized by absorb()");
  }
  if (d.second_stage_controls.cols() != 0) {
    throw ValidationError("shock-level equivalence is undefined with second-stage-only controls");
  }
  if (instrument_industries.size() != static_cast<std::size_t>(d.z.cols())) {
    throw ValidationError("one industry set per instrument is required");
  }
  if (shares.rows() == 0 || d.rows.empty()) throw ValidationError("empty design");
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (d.rows[i] >= shares.rows() || shares.cells[d.rows[i]] != d.cells[i] || !shares.present[d.rows[i]]) {
      throw ValidationError("share panel is not aligned with the estimation sample");
    }
  }

  const std::size_t n = d.rows.size();
  const std::size_t R = instrument_industries.size();
  const auto p = d.x.cols();

  // The location-level instruments must be exactly the shift-share sums.
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<std::optional<std::size_t>> cols;
    for (const auto& k : instrument_industries[r]) cols.push_back(shares.industry_index(k));
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = d.rows[i];
      double z = 0.0;
      for (std::size_t a = 0; a < cols.size(); ++a) {
        if (!cols[a]) continue;
        const double s = shares.values(idx(row), idx(*cols[a]));
        if (s == 0.0) continue;
        if (auto g = shocks.value({instrument_industries[r][a], d.cells[i].period})) z += s * *g;
      }
      scale = std::max(scale, std::fabs(z));
      worst = std::max(worst, std::fabs(z - d.z_raw(idx(i), idx(r))));
    }
    if (worst > kInstrumentMatchTolerance * std::max(scale, 1e-300)) {
      throw ValidationError("instrument '" + d.z_names[r] +
                            "' is not the exposure-weighted sum of the supplied shocks and shares");
    }
  }

  std::map<PeriodId, std::vector<std::size_t>> by_period;
  for (std::size_t i = 0; i < n; ++i) by_period[d.cells[i].period].push_back(i);

  ShockLevelDesign out;
  out.y_name = d.y_name;
  out.x_names = d.x_names;
  out.z_names = d.z_names;
  out.n_locations_obs = n;

  struct Row {
    ShockKey key;
    std::size_t block;
    double exposure;
    double g;
    double ybar;
    VectorXd xbar;
  };
  std::vector<Row> rows;
  for (std::size_t r = 0; r < R; ++r) {
    for (const auto& k : instrument_industries[r]) {
      const auto j = shares.industry_index(k);
      for (const auto& [t, members] : by_period) {
        const ShockKey key{k, t};
        double exposure = 0.0, ysum = 0.0;
        VectorXd xsum = VectorXd::Zero(p);
        if (j) {
          for (auto i : members) {
            const double s = shares.values(idx(d.rows[i]), idx(*j));
            exposure += s;
            ysum += s * d.y(idx(i));
            xsum += s * d.x.row(idx(i)).transpose();
          }
        }
        if (exposure == 0.0) {
          out.zero_exposure.push_back(key);
          continue;
        }
        auto g = shocks.value(key);
        if (!g) {
          ++out.missing_shocks;
          continue;
        }
        rows.push_back({key, r, exposure, *g, ysum / exposure, xsum / exposure});
      }
    }
  }
  if (rows.empty()) throw EstimationError("no industry-period has positive exposure in the sample");

  const auto m = idx(rows.size());
  out.weight.resize(m);
  out.exposure.resize(m);
  out.g = MatrixXd::Zero(m, idx(R));
  out.ybar.resize(m);
  out.xbar.resize(m, p);
  for (Index i = 0; i < m; ++i) {
    const Row& row = rows[static_cast<std::size_t>(i)];
    out.keys.push_back(row.key);
    out.block.push_back(row.block);
    out.exposure(i) = row.exposure;
    out.weight(i) = row.exposure / static_cast<double>(n);
    out.g(i, idx(row.block)) = row.g;
    out.ybar(i) = row.ybar;
    out.xbar.row(i) = row.xbar.transpose();
  }
  out.residualized = true;
  return out;
}

std::vector<std::int64_t> shock_cluster_labels(const ShockLevelDesign& design, ShockCluster grouping,
                                               std::size_t& n_clusters) {
  std::map<std::int64_t, std::int64_t> ids;
  std::vector<std::int64_t> raw;
  for (std::size_t i = 0; i < design.rows(); ++i) {
    const auto& key = design.keys[i];
    std::int64_t label = 0;
    switch (grouping) {
      case ShockCluster::industry: label = key.industry.number(); break;
      case ShockCluster::mineral_group: label = is_mineral(key.industry) ? -1 : key.industry.number(); break;
      case ShockCluster::shock: label = static_cast<std::int64_t>(i); break;
    }
    raw.push_back(label);
    ids.emplace(label, 0);
  }
  std::int64_t next = 0;
  for (auto& [label, id] : ids) id = next++;
  for (auto& l : raw) l = ids.at(l);
  n_clusters = ids.size();
  return raw;
}

namespace {

void require_shock_design(const ShockLevelDesign& d) {
  if (!d.residualized) throw ValidationError("shock-level design was not built from a residualized design");
  if (d.rows() == 0) throw EstimationError("empty shock-level design");
  if (!(d.weight.sum() > 0.0)) throw EstimationError("degenerate shock weighting: all weights are zero");
}

MatrixXd weighted_instruments(const ShockLevelDesign& d) { return d.g.array().colwise() * d.weight.array(); }

std::size_t shock_k(const ShockLevelDesign& d) { return static_cast<std::size_t>(d.xbar.cols()); }

}  // namespace

MatrixXd exposure_robust_vcov(const ShockLevelDesign& d, const VectorXd& beta,
                              const std::vector<std::int64_t>& clusters, std::size_t n_clusters, bool small_sample) {
  require_shock_design(d);
  if (n_clusters < 2) throw EstimationError("exposure-robust inference needs at least 2 clusters");
  const VectorXd resid = d.ybar - d.xbar * beta;
  return iv_vcov(weighted_instruments(d), d.xbar, resid, VcovKind::exposure, clusters, n_clusters, shock_k(d),
                 small_sample);
}

VectorXd exposure_robust_se(const ShockLevelDesign& d, const VectorXd& beta, const std::vector<std::int64_t>& clusters,
                            std::size_t n_clusters, bool small_sample) {
  return exposure_robust_vcov(d, beta, clusters, n_clusters, small_sample).diagonal().cwiseMax(0.0).cwiseSqrt();
}

IVEstimate estimate_shock_level_iv(const ShockLevelDesign& d, const ShockIVOptions& options) {
  require_shock_design(d);
  if (d.g.cols() != d.xbar.cols()) throw ValidationError("shock-level IV must be just-identified");

  const MatrixXd wg = weighted_instruments(d);
  const VectorXd sw = d.weight.cwiseSqrt();
  for (Index r = 0; r < d.g.cols(); ++r) {
    if ((d.g.col(r).array() != 0.0).count() == 0) {
      throw EstimationError("failed identification: no shock values for instrument '" +
                            d.z_names[static_cast<std::size_t>(r)] + "'");
    }
  }
  MatrixXd cosines = wg.transpose() * d.xbar;
  for (Index r = 0; r < cosines.rows(); ++r) {
    for (Index c = 0; c < cosines.cols(); ++c) {
      const double denom = (sw.array() * d.g.col(r).array()).matrix().norm() *
                           (sw.array() * d.xbar.col(c).array()).matrix().norm();
      cosines(r, c) = denom > 0.0 ? cosines(r, c) / denom : 0.0;
    }
  }
  Eigen::JacobiSVD<MatrixXd> svd(cosines);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin >= 1e-10)) {
    throw EstimationError("failed identification at the shock level: shocks have no variation relevant to "
                          "the regressors (smallest normalized singular value " + std::to_string(smin) + ")");
  }

  IVEstimate est;
  est.method = "shock-iv";
  est.names = d.x_names;
  est.beta = (wg.transpose() * d.xbar).partialPivLu().solve(wg.transpose() * d.ybar);
  est.residuals = d.ybar - d.xbar * est.beta;
  est.n_obs = d.rows();
  est.n_params = shock_k(d);
  est.vcov_kind = VcovKind::exposure;
  est.cluster_label = options.cluster == ShockCluster::industry        ? "hs2"
                      : options.cluster == ShockCluster::mineral_group ? "mineral_group"
                                                                       : "shock";
  const auto clusters = shock_cluster_labels(d, options.cluster, est.n_clusters);
  for (Index r = 0; r < d.g.cols(); ++r) {
    std::set<std::int64_t> seen;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      if (d.g(static_cast<Index>(i), r) != 0.0) seen.insert(clusters[i]);
    }
    if (seen.size() < 2) {
      throw EstimationError("instrument '" + d.z_names[static_cast<std::size_t>(r)] + "' spans " +
                            std::to_string(seen.size()) + " " + est.cluster_label +
                            " cluster(s); clustered inference needs at least 2 (try exposure_cluster = shock)");
    }
  }
  est.vcov = exposure_robust_vcov(d, est.beta, clusters, est.n_clusters, options.small_sample_correction);
  est.se = est.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();

  // Shock-level first stage: weighted OLS of each xbar_j on the shocks.
  const MatrixXd gwg = d.g.transpose() * wg;
  est.first_stage_coef = gwg.ldlt().solve(wg.transpose() * d.xbar);
  for (Index j = 0; j < d.xbar.cols(); ++j) {
    const VectorXd gamma = est.first_stage_coef.col(j);
    const VectorXd resid = d.xbar.col(j) - d.g * gamma;
    const MatrixXd v = iv_vcov(wg, d.g, resid, VcovKind::exposure, clusters, est.n_clusters,
                               static_cast<std::size_t>(d.g.cols()), options.small_sample_correction);
    const double var = v(j, j);
    est.first_stage_f.push_back(var > 0.0 ? gamma(j) * gamma(j) / var : std::numeric_limits<double>::infinity());
  }
  return est;
}

IVEstimate estimate_exposure_robust(const ResidualizedDesign& design, const SharePanel& shares,
                                    const ShockSeries& shocks,
                                    std::span<const std::vector<IndustryId>> instrument_industries,
                                    const ShockIVOptions& options) {
  IVEstimate location = estimate_2sls(design);
  const ShockLevelDesign sd = to_shock_level(design, shares, shocks, instrument_industries);
  const IVEstimate shock = estimate_shock_level_iv(sd, options);

  IVEstimate out = location;
  out.vcov_kind = VcovKind::exposure;
  out.n_clusters = shock.n_clusters;
  out.cluster_label = shock.cluster_label;
  out.vcov = exposure_robust_vcov(sd, location.beta,
                                  shock_cluster_labels(sd, options.cluster, out.n_clusters), out.n_clusters,
                                  options.small_sample_correction);
  out.se = out.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.first_stage_f = shock.first_stage_f;
  return out;
}

OrthogonalityCheck orthogonality_check(const ResidualizedDesign& d, const ShockLevelDesign& sd,
                                       const VectorXd& beta) {
  OrthogonalityCheck out;
  const VectorXd e = d.y - d.x * beta;
  out.location_sum = d.z_raw.transpose() * e;
  const VectorXd ebar = sd.ybar - sd.xbar * beta;
  out.shock_sum = static_cast<double>(sd.n_locations_obs) * (weighted_instruments(sd).transpose() * ebar);
  for (Index r = 0; r < out.location_sum.size(); ++r) {
    // Scale by sum |z e| so that an exactly-zero moment still compares sensibly.
    const double scale = (d.z_raw.col(r).array() * e.array()).abs().sum();
    const double gap = std::fabs(out.location_sum(r) - out.shock_sum(r));
    out.max_relative_gap = std::max(out.max_relative_gap, scale > 0.0 ? gap / scale : gap);
  }
  return out;
}

void write_shock_design_csv(std::ostream& out, const ShockLevelDesign& d) {
  out << "hs2,year,instrument,weight,g," << d.y_name << "_bar";
  for (const auto& x : d.x_names) out << ',' << x << "_bar";
  out << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const auto r = idx(i);
    out << d.keys[i].industry.code() << ',' << d.keys[i].period.year << ',' << d.z_names[d.block[i]] << ','
        << format_real(d.weight(r)) << ',' << format_real(d.g(r, idx(d.block[i]))) << ','
        << format_real(d.ybar(r));
    for (Index j = 0; j < d.xbar.cols(); ++j) out << ',' << format_real(d.xbar(r, j));
    out << '\n';
  }
}

}  // namespace ssiv
