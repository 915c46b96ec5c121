#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssiv/panel.hpp"
#include "ssiv/regress.hpp"
#include "ssiv/shiftshare.hpp"

namespace ssiv {

/// Industry-period representation of a residualized location-level design.
/// Each instrument r contributes one block of rows, one per (k, t) with k in
/// its industry set; g sits in column r for that block and zero elsewhere.
struct ShockLevelDesign {
  std::vector<ShockKey> keys;
  std::vector<std::size_t> block;  ///< instrument index of each row
  Eigen::VectorXd weight;          ///< s_kt = sum_l s_lkt / N
  Eigen::MatrixXd g;               ///< rows x instruments
  Eigen::VectorXd ybar;
  Eigen::MatrixXd xbar;            ///< rows x endogenous
  Eigen::VectorXd exposure;        ///< sum_l s_lkt (unscaled)

  std::string y_name;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::size_t n_locations_obs = 0;  ///< N of the location-level sample
  std::size_t missing_shocks = 0;   ///< (k,t) dropped for lack of a shock value
  std::vector<ShockKey> zero_exposure;  ///< (k,t) dropped because sum_l s_lkt == 0
  bool residualized = false;

  std::size_t rows() const noexcept { return keys.size(); }
};

/// Exposure-weighted averages vbar_kt = sum_l s_lkt v_lt / sum_l s_lkt of the
/// residualized outcome and regressors. Refuses designs that were not produced
/// by absorb() and instruments that are not sum_k s_lkt g_kt of these shares.
ShockLevelDesign to_shock_level(const ResidualizedDesign& design, const SharePanel& shares, const ShockSeries& shocks,
                                std::span<const std::vector<IndustryId>> instrument_industries);

enum class ShockCluster {
  industry,       ///< HS2 code
  mineral_group,  ///< HS 25/26/27 pooled into one cluster, other codes on their own
  shock,          ///< every (k, t) row its own cluster
};

std::vector<std::int64_t> shock_cluster_labels(const ShockLevelDesign& design, ShockCluster grouping,
                                               std::size_t& n_clusters);

/// Cluster-robust sandwich at the shock level for the weighted IV residuals.
Eigen::MatrixXd exposure_robust_vcov(const ShockLevelDesign& design, const Eigen::VectorXd& beta,
                                     const std::vector<std::int64_t>& clusters, std::size_t n_clusters,
                                     bool small_sample = true);
Eigen::VectorXd exposure_robust_se(const ShockLevelDesign& design, const Eigen::VectorXd& beta,
                                   const std::vector<std::int64_t>& clusters, std::size_t n_clusters,
                                   bool small_sample = true);

struct ShockIVOptions {
  ShockCluster cluster = ShockCluster::industry;
  bool small_sample_correction = true;
};

/// s_kt-weighted IV of ybar on xbar instrumented by g, with clustered
/// variance and shock-level first-stage F statistics.
IVEstimate estimate_shock_level_iv(const ShockLevelDesign& design, const ShockIVOptions& options = {});

/// Location-level SSIV coefficients with exposure-robust (shock-level
/// clustered) standard errors and first-stage F.
IVEstimate estimate_exposure_robust(const ResidualizedDesign& design, const SharePanel& shares,
                                    const ShockSeries& shocks,
                                    std::span<const std::vector<IndustryId>> instrument_industries,
                                    const ShockIVOptions& options = {});

struct OrthogonalityCheck {
  Eigen::VectorXd location_sum;  ///< sum_lt z_rlt e_lt
  Eigen::VectorXd shock_sum;     ///< N * sum_kt s_kt g_rkt ebar_kt
  double max_relative_gap = 0.0;
};

OrthogonalityCheck orthogonality_check(const ResidualizedDesign& design, const ShockLevelDesign& shock_design,
                                       const Eigen::VectorXd& beta);

/// k,t,instrument,weight,g,ybar,xbar_<name>...
void write_shock_design_csv(std::ostream& out, const ShockLevelDesign& design);

}  // namespace ssiv
