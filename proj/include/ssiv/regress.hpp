#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssiv/panel.hpp"

namespace ssiv {

enum class VcovKind {
  classical,
  robust,    ///< HC1
  cluster,   ///< clustered on a panel column (or "location" / "period")
  exposure,  ///< industry-clustered at the shock level; see shocklevel.hpp
};

std::string_view to_string(VcovKind k);
VcovKind parse_vcov_kind(std::string_view s);

/// Just-identified linear IV (or OLS) model on a location x period panel.
struct RegressionSpec {
  std::string outcome;
  /// Outcome is read at t - outcome_lag. Falsification tests set this >= 1.
  int outcome_lag = 0;
  std::vector<std::string> endogenous;
  std::vector<std::string> instruments;  ///< one per endogenous column
  std::vector<std::string> controls;     ///< exogenous, enter both stages
  /// Adds the outcome at t - outcome_lag - 1 as a control.
  bool lagged_outcome_control = false;
  /// When false the lagged outcome enters the second stage only.
  bool lagged_outcome_in_first_stage = true;
  bool location_fe = true;
  bool period_fe = true;
  /// Incomplete share control S_lt, interacted with period indicators.
  std::optional<std::string> share_control;
  VcovKind vcov = VcovKind::classical;
  std::string cluster_column;  ///< for VcovKind::cluster
  /// (G/(G-1))((N-1)/(N-K)) for clustered, N/(N-K) for robust.
  bool small_sample_correction = true;
  /// Columns divided by `normalization` before estimation (trade regressors).
  std::vector<std::string> normalized;
  double normalization = 1e6;

  void check() const;
};

enum class AbsorbMethod { automatic, alternating, dense };

struct AbsorbOptions {
  AbsorbMethod method = AbsorbMethod::automatic;
  double tolerance = 1e-10;     ///< max cell change between sweeps, relative to column scale
  int max_sweeps = 10000;
  std::size_t dense_max_rows = 5000;
};

/// Estimation sample with every variable projected off the fixed effects,
/// the exogenous controls and the share-control x period block.
struct ResidualizedDesign {
  std::vector<std::size_t> rows;  ///< panel rows kept after listwise deletion
  std::vector<Cell> cells;
  std::string y_name;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::vector<std::string> second_stage_names;  ///< controls excluded from the first stage

  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  Eigen::MatrixXd z_raw;  ///< instruments before projection
  Eigen::MatrixXd second_stage_controls;

  std::size_t absorbed_rank = 0;  ///< fixed-effect and control degrees of freedom
  VcovKind vcov = VcovKind::classical;
  bool small_sample_correction = true;
  std::vector<std::int64_t> clusters;  ///< dense 0..G-1 ids when vcov == cluster
  std::size_t n_clusters = 0;
  std::string cluster_label;

  bool residualized = false;
  bool used_dense = false;
  int sweeps = 0;

  std::size_t n() const noexcept { return static_cast<std::size_t>(y.size()); }
};

ResidualizedDesign absorb(const PanelDataset& panel, const RegressionSpec& spec, const AbsorbOptions& options = {});

struct IVEstimate {
  std::string method;  ///< "ols", "2sls", "shock-iv"
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  std::vector<double> first_stage_f;      ///< one per endogenous variable
  Eigen::MatrixXd first_stage_coef;       ///< instruments x endogenous
  std::size_t n_obs = 0;
  std::size_t n_params = 0;               ///< K used in degrees-of-freedom corrections
  std::size_t n_clusters = 0;
  VcovKind vcov_kind = VcovKind::classical;
  std::string cluster_label;
  Eigen::VectorXd residuals;

  /// Degrees of freedom for t critical values: G-1 when clustered, N-K otherwise.
  double df() const;
  double t_stat(std::size_t j) const;
  double p_value(std::size_t j) const;
  std::size_t index_of(std::string_view name) const;
};

/// Two-sided critical value at significance `alpha` (Student t, normal when df is infinite).
double t_critical(double alpha, double df);

/// Least squares of y on the residualized endogenous columns (and any
/// second-stage-only controls). Throws EstimationError when the design is
/// rank deficient (reciprocal condition number below 1e-12).
IVEstimate estimate_ols(const ResidualizedDesign& design);
IVEstimate estimate_ols(const PanelDataset& panel, const RegressionSpec& spec, const AbsorbOptions& options = {});

/// beta = (Z'X)^{-1} Z'y on residualized data. Throws EstimationError when an
/// instrument has no variation left after absorbing controls or Z'X is
/// numerically singular.
IVEstimate estimate_2sls(const ResidualizedDesign& design);
IVEstimate estimate_2sls(const PanelDataset& panel, const RegressionSpec& spec, const AbsorbOptions& options = {});

/// Wald F for instrument `which` in the first stage of endogenous `which`,
/// using the design's variance estimator.
double first_stage_F(const ResidualizedDesign& design, std::size_t which);

/// Re-estimates with the outcome read at t - lag. A lagged outcome control,
/// when requested, moves along to t - lag - 1.
IVEstimate falsification(const PanelDataset& panel, const RegressionSpec& spec, int lag,
                         const AbsorbOptions& options = {});

/// |sum_i e_i z_ri| / (n sd(z_r) sd(e)) for each instrument; zero at an exact
/// just-identified solution.
Eigen::VectorXd scaled_moments(const ResidualizedDesign& design, const Eigen::VectorXd& beta);

/// Generic just-identified sandwich estimator. `instr` and `regs` are n x p.
Eigen::MatrixXd iv_vcov(const Eigen::MatrixXd& instr, const Eigen::MatrixXd& regs, const Eigen::VectorXd& resid,
                        VcovKind kind, const std::vector<std::int64_t>& clusters, std::size_t n_clusters,
                        std::size_t k_total, bool small_sample);

}  // namespace ssiv
