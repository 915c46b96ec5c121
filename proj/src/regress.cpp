#include "ssiv/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ssiv/error.hpp"

namespace ssiv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kRankTolerance = 1e-12;
constexpr double kIdentificationTolerance = 1e-10;
constexpr double kVanishedTolerance = 1e-9;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

/// Group ids 0..G-1 in first-seen order of a sorted key.
template <class Key>
std::vector<std::int64_t> dense_ids(const std::vector<Key>& keys, std::size_t& n_groups) {
  std::map<Key, std::int64_t> ids;
  for (const auto& k : keys) ids.emplace(k, 0);
  std::int64_t next = 0;
  for (auto& [k, id] : ids) id = next++;
  std::vector<std::int64_t> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back(ids.at(k));
  n_groups = ids.size();
  return out;
}

struct FactorSet {
  std::vector<std::vector<std::int64_t>> ids;
  std::vector<std::size_t> levels;
  std::vector<std::string> names;
};

std::size_t connected_rank(const FactorSet& fe) {
  if (fe.ids.empty()) return 0;
  if (fe.ids.size() == 1) return fe.levels[0];
  // Two-way: L + T - number of connected components of the bipartite graph.
  const std::size_t a = fe.levels[0];
  std::vector<std::size_t> parent(a + fe.levels[1]);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < fe.ids[0].size(); ++i) {
    auto u = find(static_cast<std::size_t>(fe.ids[0][i]));
    auto v = find(a + static_cast<std::size_t>(fe.ids[1][i]));
    if (u != v) parent[u] = v;
  }
  std::size_t components = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) components += find(i) == i;
  return a + fe.levels[1] - components;
}

/// Alternating demeaning over each factor until the largest update falls below
/// tolerance * column scale.
int demean_alternating(MatrixXd& m, const FactorSet& fe, double tol, int max_sweeps) {
  if (fe.ids.empty() || m.cols() == 0) return 0;
  const Index n = m.rows();
  VectorXd scale(m.cols());
  for (Index j = 0; j < m.cols(); ++j) scale(j) = std::max(1.0, m.col(j).cwiseAbs().maxCoeff());

  std::vector<VectorXd> counts;
  for (std::size_t f = 0; f < fe.ids.size(); ++f) {
    VectorXd c = VectorXd::Zero(idx(fe.levels[f]));
    for (Index i = 0; i < n; ++i) c(fe.ids[f][static_cast<std::size_t>(i)]) += 1.0;
    counts.push_back(std::move(c));
  }

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t f = 0; f < fe.ids.size(); ++f) {
      MatrixXd sums = MatrixXd::Zero(idx(fe.levels[f]), m.cols());
      for (Index i = 0; i < n; ++i) sums.row(fe.ids[f][static_cast<std::size_t>(i)]) += m.row(i);
      for (Index g = 0; g < sums.rows(); ++g) sums.row(g) /= counts[f](g);
      for (Index i = 0; i < n; ++i) m.row(i) -= sums.row(fe.ids[f][static_cast<std::size_t>(i)]);
      max_change = std::max(max_change, (sums.array().rowwise() / scale.transpose().array()).abs().maxCoeff());
    }
    // With a single factor one pass is exact.
    if (fe.ids.size() == 1 || max_change < tol) return sweep;
  }
  throw EstimationError("fixed-effect demeaning did not converge in " + std::to_string(max_sweeps) + " sweeps");
}

std::size_t demean_dense(MatrixXd& m, const FactorSet& fe, Index n) {
  Index cols = 0;
  for (auto l : fe.levels) cols += idx(l);
  if (cols == 0) return 0;
  MatrixXd d = MatrixXd::Zero(n, cols);
  Index offset = 0;
  for (std::size_t f = 0; f < fe.ids.size(); ++f) {
    for (Index i = 0; i < n; ++i) d(i, offset + fe.ids[f][static_cast<std::size_t>(i)]) = 1.0;
    offset += idx(fe.levels[f]);
  }
  // The two-way dummy matrix is rank deficient, so project on the leading
  // rank columns of Q rather than calling solve().
  Eigen::ColPivHouseholderQR<MatrixXd> qr(d);
  const Index rank = qr.rank();
  if (m.cols() > 0 && rank > 0) {
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, rank);
    m -= q * (q.transpose() * m);
  }
  return static_cast<std::size_t>(rank);
}

double rcond_of_columns(const MatrixXd& m) {
  if (m.cols() == 0) return 1.0;
  MatrixXd scaled = m;
  for (Index j = 0; j < m.cols(); ++j) {
    const double nrm = m.col(j).norm();
    if (nrm == 0.0) return 0.0;
    scaled.col(j) /= nrm;
  }
  Eigen::JacobiSVD<MatrixXd> svd(scaled);
  const auto& s = svd.singularValues();
  return s(s.size() - 1) / s(0);
}

}  // namespace

std::string_view to_string(VcovKind k) {
  switch (k) {
    case VcovKind::classical: return "classical";
    case VcovKind::robust: return "robust";
    case VcovKind::cluster: return "cluster";
    case VcovKind::exposure: return "exposure";
  }
  return "";
}

VcovKind parse_vcov_kind(std::string_view s) {
  if (s == "classical") return VcovKind::classical;
  if (s == "robust") return VcovKind::robust;
  if (s == "cluster") return VcovKind::cluster;
  if (s == "exposure" || s == "industry") return VcovKind::exposure;
  throw ValidationError("unknown vcov kind '" + std::string(s) + "'");
}

void RegressionSpec::check() const {
  if (outcome.empty()) throw ValidationError("spec: outcome is required");
  if (endogenous.empty()) throw ValidationError("spec: at least one regressor is required");
  if (!instruments.empty() && instruments.size() != endogenous.size()) {
    throw ValidationError("spec: " + std::to_string(instruments.size()) + " instruments for " +
                          std::to_string(endogenous.size()) + " endogenous variables (must be just-identified)");
  }
  if (outcome_lag < 0) throw ValidationError("spec: outcome_lag must be >= 0");
  for (const auto& group : {endogenous, instruments, controls}) {
    if (std::find(group.begin(), group.end(), outcome) != group.end() && outcome_lag == 0) {
      throw ValidationError("spec: outcome '" + outcome + "' also appears among regressors");
    }
  }
  std::set<std::string> seen;
  for (const auto& group : {endogenous, instruments, controls}) {
    for (const auto& c : group) {
      if (!seen.insert(c).second) throw ValidationError("spec: column '" + c + "' listed twice");
    }
  }
  if (vcov == VcovKind::cluster && cluster_column.empty()) {
    throw ValidationError("spec: cluster vcov requires a cluster column");
  }
  if (!(normalization > 0.0)) throw ValidationError("spec: normalization must be positive");
}

ResidualizedDesign absorb(const PanelDataset& source, const RegressionSpec& spec, const AbsorbOptions& options) {
  spec.check();

  PanelDataset panel = source;
  std::string y_col = spec.outcome;
  if (spec.outcome_lag > 0) {
    panel = lag_column(panel, spec.outcome, spec.outcome_lag);
    y_col = lag_name(spec.outcome, spec.outcome_lag);
  }
  std::vector<std::string> controls = spec.controls;
  std::vector<std::string> stage2_only;
  if (spec.lagged_outcome_control) {
    const int l = spec.outcome_lag + 1;
    panel = lag_column(panel, spec.outcome, l);
    (spec.lagged_outcome_in_first_stage ? controls : stage2_only).push_back(lag_name(spec.outcome, l));
  }

  auto scale_of = [&](const std::string& name) {
    return std::find(spec.normalized.begin(), spec.normalized.end(), name) != spec.normalized.end()
               ? 1.0 / spec.normalization
               : 1.0;
  };

  std::vector<std::string> required{y_col};
  for (const std::vector<std::string>* g : std::initializer_list<const std::vector<std::string>*>{&spec.endogenous, &spec.instruments, &controls, &stage2_only}) {
    required.insert(required.end(), g->begin(), g->end());
  }
  if (spec.share_control) required.push_back(*spec.share_control);
  const bool cluster_on_column = spec.vcov == VcovKind::cluster && spec.cluster_column != "location" &&
                                 spec.cluster_column != "period";
  if (cluster_on_column) required.push_back(spec.cluster_column);
  for (const auto& c : required) (void)panel.column(c);

  ResidualizedDesign d;
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    bool ok = true;
    for (const auto& c : required) {
      auto v = panel.value(c, r);
      if (!v || !std::isfinite(*v)) {
        ok = false;
        break;
      }
    }
    if (ok) {
      d.rows.push_back(r);
      d.cells.push_back(panel.cell(r));
    }
  }
  const std::size_t n = d.rows.size();
  if (n == 0) throw EstimationError("no complete observations for this regression");

  auto gather = [&](const std::vector<std::string>& names) {
    MatrixXd m(idx(n), idx(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double s = scale_of(names[j]);
      for (std::size_t i = 0; i < n; ++i) m(idx(i), idx(j)) = *panel.value(names[j], d.rows[i]) * s;
    }
    return m;
  };

  d.y_name = y_col;
  d.x_names = spec.endogenous;
  d.z_names = spec.instruments;
  d.second_stage_names = stage2_only;
  MatrixXd y = gather({y_col});
  MatrixXd x = gather(spec.endogenous);
  MatrixXd z = gather(spec.instruments);
  MatrixXd c2 = gather(stage2_only);
  d.z_raw = z;

  // Fixed-effect factors.
  FactorSet fe;
  std::vector<LocationId> locs;
  std::vector<PeriodId> pers;
  for (const auto& c : d.cells) {
    locs.push_back(c.location);
    pers.push_back(c.period);
  }
  std::size_t n_periods = 0;
  auto period_ids = dense_ids(pers, n_periods);
  if (spec.location_fe) {
    std::size_t g = 0;
    fe.ids.push_back(dense_ids(locs, g));
    fe.levels.push_back(g);
    fe.names.push_back("location");
  }
  if (spec.period_fe) {
    fe.ids.push_back(period_ids);
    fe.levels.push_back(n_periods);
    fe.names.push_back("period");
  }
  for (std::size_t f = 0; f < fe.ids.size(); ++f) {
    std::vector<std::size_t> counts(fe.levels[f], 0);
    for (auto id : fe.ids[f]) ++counts[static_cast<std::size_t>(id)];
    for (std::size_t g = 0; g < counts.size(); ++g) {
      if (counts[g] < 2) {
        const auto it = std::find(fe.ids[f].begin(), fe.ids[f].end(), static_cast<std::int64_t>(g));
        const Cell& c = d.cells[static_cast<std::size_t>(it - fe.ids[f].begin())];
        throw EstimationError(fe.names[f] + " fixed-effect group " +
                              (f == 0 && spec.location_fe ? c.location.code() : std::to_string(c.period.year)) +
                              " has a single observation after listwise deletion");
      }
    }
  }

  // Exogenous control block: controls, then share control x period indicators.
  std::vector<std::string> w_names = controls;
  MatrixXd w_ctrl = gather(controls);
  MatrixXd w(idx(n), w_ctrl.cols() + (spec.share_control ? idx(n_periods) : 0));
  w.leftCols(w_ctrl.cols()) = w_ctrl;
  if (spec.share_control) {
    const auto periods = std::set<PeriodId>(pers.begin(), pers.end());
    w.rightCols(idx(n_periods)).setZero();
    for (std::size_t i = 0; i < n; ++i) {
      w(idx(i), w_ctrl.cols() + period_ids[i]) = *panel.value(*spec.share_control, d.rows[i]);
    }
    for (const auto& p : periods) w_names.push_back(*spec.share_control + "_x_" + std::to_string(p.year));
  }

  // Everything that gets projected, stacked: y | x | z | c2 | w.
  const Index ny = 1, nx = x.cols(), nz = z.cols(), nc2 = c2.cols(), nw = w.cols();
  MatrixXd all(idx(n), ny + nx + nz + nc2 + nw);
  all << y, x, z, c2, w;
  const MatrixXd w_before = w;

  const bool dense = options.method == AbsorbMethod::dense ||
                     (options.method == AbsorbMethod::automatic && n <= options.dense_max_rows);
  std::size_t fe_rank = 0;
  if (dense) {
    fe_rank = demean_dense(all, fe, idx(n));
    d.used_dense = true;
  } else {
    d.sweeps = demean_alternating(all, fe, options.tolerance, options.max_sweeps);
    fe_rank = connected_rank(fe);
  }

  MatrixXd w_fe = all.rightCols(nw);
  std::vector<std::string> vanished;
  for (Index j = 0; j < nw; ++j) {
    const double before = w_before.col(j).norm();
    if (before == 0.0 || w_fe.col(j).norm() <= kVanishedTolerance * before) vanished.push_back(w_names[static_cast<std::size_t>(j)]);
  }
  if (!vanished.empty()) {
    throw EstimationError("collinear control block: absorbed by fixed effects: " + join(vanished));
  }
  if (nw > 0 && rcond_of_columns(w_fe) < kRankTolerance) {
    MatrixXd scaled = w_fe;
    for (Index j = 0; j < nw; ++j) scaled.col(j) /= scaled.col(j).norm();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(scaled);
    qr.setThreshold(1e-10);
    qr.compute(scaled);
    std::vector<std::string> offending;
    const auto& perm = qr.colsPermutation().indices();
    for (Index j = qr.rank(); j < nw; ++j) offending.push_back(w_names[static_cast<std::size_t>(perm(j))]);
    if (offending.empty()) offending = w_names;
    throw EstimationError("collinear control block: " + join(offending));
  }

  MatrixXd v = all.leftCols(ny + nx + nz + nc2);
  if (nw > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(w_fe);
    v -= w_fe * qr.solve(v);
  }

  d.y = v.col(0);
  d.x = v.middleCols(ny, nx);
  d.z = v.middleCols(ny + nx, nz);
  d.second_stage_controls = v.middleCols(ny + nx + nz, nc2);
  d.absorbed_rank = fe_rank + static_cast<std::size_t>(nw);

  d.vcov = spec.vcov;
  d.small_sample_correction = spec.small_sample_correction;
  if (spec.vcov == VcovKind::cluster) {
    d.cluster_label = spec.cluster_column;
    if (spec.cluster_column == "location") {
      d.clusters = dense_ids(locs, d.n_clusters);
    } else if (spec.cluster_column == "period") {
      d.clusters = dense_ids(pers, d.n_clusters);
    } else {
      std::vector<double> keys;
      for (auto r : d.rows) keys.push_back(*panel.value(spec.cluster_column, r));
      d.clusters = dense_ids(keys, d.n_clusters);
    }
    if (d.n_clusters < 2) throw EstimationError("clustered inference needs at least 2 clusters");
  }
  d.residualized = true;
  return d;
}

double t_critical(double alpha, double df) {
  const double q = 1.0 - alpha / 2.0;
  if (!std::isfinite(df) || df > 1e7) return boost::math::quantile(boost::math::normal(), q);
  return boost::math::quantile(boost::math::students_t(std::max(df, 1.0)), q);
}

double IVEstimate::df() const {
  if (vcov_kind == VcovKind::cluster || vcov_kind == VcovKind::exposure) {
    return static_cast<double>(n_clusters) - 1.0;
  }
  return static_cast<double>(n_obs) - static_cast<double>(n_params);
}

double IVEstimate::t_stat(std::size_t j) const { return beta(idx(j)) / se(idx(j)); }

double IVEstimate::p_value(std::size_t j) const {
  const double t = std::fabs(t_stat(j));
  if (!std::isfinite(t)) return std::isnan(t) ? t : 0.0;
  const double dof = df();
  if (dof < 1.0) return std::numeric_limits<double>::quiet_NaN();
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(dof), t));
}

std::size_t IVEstimate::index_of(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ValidationError("no coefficient named '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

MatrixXd iv_vcov(const MatrixXd& instr, const MatrixXd& regs, const VectorXd& resid, VcovKind kind,
                 const std::vector<std::int64_t>& clusters, std::size_t n_clusters, std::size_t k_total,
                 bool small_sample) {
  const double n = static_cast<double>(resid.size());
  const double k = static_cast<double>(k_total);
  if (n <= k) throw EstimationError("not enough observations: N=" + std::to_string(resid.size()) + ", K=" +
                                    std::to_string(k_total));
  const MatrixXd bread = (instr.transpose() * regs).inverse();
  MatrixXd v;
  switch (kind) {
    case VcovKind::classical: {
      const double s2 = resid.squaredNorm() / (n - k);
      v = s2 * bread * (instr.transpose() * instr) * bread.transpose();
      break;
    }
    case VcovKind::robust: {
      const MatrixXd scores = instr.array().colwise() * resid.array();
      v = bread * (scores.transpose() * scores) * bread.transpose();
      if (small_sample) v *= n / (n - k);
      break;
    }
    case VcovKind::cluster:
    case VcovKind::exposure: {
      if (clusters.size() != static_cast<std::size_t>(resid.size())) {
        throw EstimationError("cluster labels do not match the sample");
      }
      if (n_clusters < 2) throw EstimationError("clustered inference needs at least 2 clusters");
      MatrixXd sums = MatrixXd::Zero(idx(n_clusters), instr.cols());
      for (Index i = 0; i < resid.size(); ++i) {
        sums.row(clusters[static_cast<std::size_t>(i)]) += instr.row(i) * resid(i);
      }
      v = bread * (sums.transpose() * sums) * bread.transpose();
      if (small_sample) {
        const double g = static_cast<double>(n_clusters);
        v *= (g / (g - 1.0)) * ((n - 1.0) / (n - k));
      }
      break;
    }
  }
  return 0.5 * (v + v.transpose());
}

namespace {

IVEstimate finish(std::string method, std::vector<std::string> names, VectorXd beta, const MatrixXd& instr,
                  const MatrixXd& regs, const VectorXd& y, const ResidualizedDesign& d) {
  IVEstimate est;
  est.method = std::move(method);
  est.names = std::move(names);
  est.beta = std::move(beta);
  est.residuals = y - regs * est.beta;
  est.n_obs = d.n();
  est.n_params = static_cast<std::size_t>(regs.cols()) + d.absorbed_rank;
  est.vcov_kind = d.vcov == VcovKind::exposure ? VcovKind::classical : d.vcov;
  est.n_clusters = d.n_clusters;
  est.cluster_label = d.cluster_label;
  est.vcov = iv_vcov(instr, regs, est.residuals, est.vcov_kind, d.clusters, d.n_clusters, est.n_params,
                     d.small_sample_correction);
  est.se = est.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return est;
}

void require_residualized(const ResidualizedDesign& d) {
  if (!d.residualized) throw ValidationError("design has not been residualized by absorb()");
}

void check_rank(const MatrixXd& regs, const std::vector<std::string>& names) {
  for (Index j = 0; j < regs.cols(); ++j) {
    if (regs.col(j).norm() == 0.0) {
      throw EstimationError("rank deficient design: regressor '" + names[static_cast<std::size_t>(j)] +
                            "' has no variation after absorbing controls");
    }
  }
  const double rc = rcond_of_columns(regs);
  if (rc < kRankTolerance) {
    throw EstimationError("rank deficient design (reciprocal condition number " + std::to_string(rc) + ")");
  }
}

MatrixXd hstack(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd m(a.rows(), a.cols() + b.cols());
  m << a, b;
  return m;
}

}  // namespace

IVEstimate estimate_ols(const ResidualizedDesign& d) {
  require_residualized(d);
  const MatrixXd regs = hstack(d.x, d.second_stage_controls);
  std::vector<std::string> names = d.x_names;
  names.insert(names.end(), d.second_stage_names.begin(), d.second_stage_names.end());
  check_rank(regs, names);
  VectorXd beta = regs.colPivHouseholderQr().solve(d.y);
  return finish("ols", std::move(names), std::move(beta), regs, regs, d.y, d);
}

IVEstimate estimate_ols(const PanelDataset& panel, const RegressionSpec& spec, const AbsorbOptions& options) {
  RegressionSpec s = spec;
  s.instruments.clear();
  return estimate_ols(absorb(panel, s, options));
}

namespace {

void check_identification(const ResidualizedDesign& d) {
  for (Index j = 0; j < d.z.cols(); ++j) {
    const double raw = d.z_raw.col(j).norm();
    if (raw == 0.0 || d.z.col(j).norm() <= kVanishedTolerance * raw) {
      throw EstimationError("failed identification: instrument '" + d.z_names[static_cast<std::size_t>(j)] +
                            "' has no variation after absorbing fixed effects and controls");
    }
  }
  MatrixXd cosines = d.z.transpose() * d.x;
  for (Index r = 0; r < cosines.rows(); ++r) {
    for (Index c = 0; c < cosines.cols(); ++c) {
      const double denom = d.z.col(r).norm() * d.x.col(c).norm();
      cosines(r, c) = denom > 0.0 ? cosines(r, c) / denom : 0.0;
    }
  }
  Eigen::JacobiSVD<MatrixXd> svd(cosines);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin >= kIdentificationTolerance)) {
    throw EstimationError("weak or failed identification: smallest singular value of the normalized Z'X is " +
                          std::to_string(smin));
  }
}

}  // namespace

IVEstimate estimate_2sls(const ResidualizedDesign& d) {
  require_residualized(d);
  if (d.z.cols() != d.x.cols() || d.z.cols() == 0) {
    throw ValidationError("2SLS needs exactly one instrument per endogenous variable");
  }
  check_identification(d);

  std::vector<std::string> names = d.x_names;
  names.insert(names.end(), d.second_stage_names.begin(), d.second_stage_names.end());
  const MatrixXd regs = hstack(d.x, d.second_stage_controls);
  MatrixXd instr;
  if (d.second_stage_controls.cols() == 0) {
    instr = d.z;
  } else {
    // First stage without the second-stage-only controls; the fitted values
    // then serve as instruments alongside those controls.
    const MatrixXd xhat = d.z * d.z.colPivHouseholderQr().solve(d.x);
    instr = hstack(xhat, d.second_stage_controls);
  }
  VectorXd beta = (instr.transpose() * regs).partialPivLu().solve(instr.transpose() * d.y);
  IVEstimate est = finish("2sls", std::move(names), std::move(beta), instr, regs, d.y, d);

  est.first_stage_coef = d.z.colPivHouseholderQr().solve(d.x);
  for (std::size_t j = 0; j < static_cast<std::size_t>(d.x.cols()); ++j) {
    est.first_stage_f.push_back(first_stage_F(d, j));
  }
  return est;
}

IVEstimate estimate_2sls(const PanelDataset& panel, const RegressionSpec& spec, const AbsorbOptions& options) {
  return estimate_2sls(absorb(panel, spec, options));
}

double first_stage_F(const ResidualizedDesign& d, std::size_t which) {
  require_residualized(d);
  if (which >= static_cast<std::size_t>(d.x.cols()) || which >= static_cast<std::size_t>(d.z.cols())) {
    throw ValidationError("first_stage_F: index out of range");
  }
  const VectorXd xj = d.x.col(idx(which));
  const VectorXd gamma = d.z.colPivHouseholderQr().solve(xj);
  const VectorXd resid = xj - d.z * gamma;
  const VcovKind kind = d.vcov == VcovKind::exposure ? VcovKind::classical : d.vcov;
  const std::size_t k = static_cast<std::size_t>(d.z.cols()) + d.absorbed_rank;
  const MatrixXd v = iv_vcov(d.z, d.z, resid, kind, d.clusters, d.n_clusters, k, d.small_sample_correction);
  const double var = v(idx(which), idx(which));
  const double g = gamma(idx(which));
  if (var <= 0.0) return g == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return g * g / var;
}

IVEstimate falsification(const PanelDataset& panel, const RegressionSpec& spec, int lag,
                         const AbsorbOptions& options) {
  if (lag < 1) throw ValidationError("falsification lag must be >= 1");
  RegressionSpec s = spec;
  s.outcome_lag = spec.outcome_lag + lag;
  return estimate_2sls(panel, s, options);
}

VectorXd scaled_moments(const ResidualizedDesign& d, const VectorXd& beta) {
  const MatrixXd regs = hstack(d.x, d.second_stage_controls);
  const VectorXd e = d.y - regs * beta.head(regs.cols());
  const double n = static_cast<double>(e.size());
  auto sd = [n](const VectorXd& v) {
    const double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / n);
  };
  const double sd_e = sd(e);
  VectorXd out(d.z.cols());
  for (Index r = 0; r < d.z.cols(); ++r) {
    const double denom = n * sd(d.z.col(r)) * sd_e;
    const double m = e.dot(d.z.col(r));
    out(r) = denom > 0.0 ? std::fabs(m) / denom : std::fabs(m);
  }
  return out;
}

}  // namespace ssiv
