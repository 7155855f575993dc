#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tsdid/dense_ols.hpp"
#include "tsdid/fe_solver.hpp"
#include "tsdid/inference.hpp"
#include "tsdid/panel.hpp"
#include "tsdid/second_stage.hpp"

namespace tsdid {

/// Which level absorbs the time-invariant effect in the first stage.
enum class FixedEffectsKind {
    Unit,   // unit + period effects
    Group,  // first-treatment group + period effects
};

struct FirstStageSpec {
    FixedEffectsKind effects = FixedEffectsKind::Unit;
    std::vector<std::string> covariates;
    FeOptions solver;
};

/// Fixed-effects design of `data` for the given first stage, fitting on the
/// rows flagged in `sample_mask` (empty: every row).
[[nodiscard]] FeSpec build_fe_spec(const PanelDataset& data, const FirstStageSpec& spec,
                                   std::vector<char> sample_mask = {});

struct ConvergenceInfo {
    int iterations = 0;
    bool converged = false;
    double max_abs_update = 0.0;
};

struct EstimateResult {
    std::string estimator;          // "two_stage", "twfe" or "imputation"
    SecondStageKind kind = SecondStageKind::Static;
    std::vector<Term> terms;
    Eigen::VectorXd point;
    Eigen::MatrixXd vcov;           // empty for point-only estimators
    Eigen::VectorXd se;             // NaN when no variance is available
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    std::optional<InferenceMethod> method;
    int n_bootstraps = 0;
    std::uint64_t seed = 0;
    int n_failed_replicates = 0;
    std::optional<ConvergenceInfo> first_stage;
};

/// Everything the two-stage point estimate is built from.
struct TwoStageFit {
    FeSpec first_stage_design;
    FirstStageFit first_stage;
    Eigen::VectorXd adjusted_outcome;   // y - first-stage prediction, every row
    Eigen::VectorXd first_residuals;    // adjusted outcome on untreated rows, 0 on treated
    SecondStageDesign design;           // full design before collinearity checks
    DenseOlsFit second_stage;
    Eigen::MatrixXd retained_design;    // intercept + retained term columns
    std::vector<Term> terms;            // retained terms
    Eigen::VectorXd point;              // coefficients of `terms`
};

/// Point estimates only: first stage on untreated rows, second-stage OLS of
/// the adjusted outcome on the treatment indicators over every row.
/// Throws NoTreatedObservations, NoUntreatedObservations, UnseenLevel,
/// DidNotConverge.
[[nodiscard]] TwoStageFit fit_two_stage(const PanelDataset& data, const FirstStageSpec& first_stage,
                                        const SecondStageSpec& second_stage);

/// Two-stage estimate with GMM-corrected or cluster-bootstrap variance.
[[nodiscard]] EstimateResult estimate_two_stage(const PanelDataset& data, const FirstStageSpec& first_stage,
                                                const SecondStageSpec& second_stage,
                                                const InferenceSpec& inference = {});

/// Imputation estimator: mean of y - Y(0)-hat by term. Points only.
[[nodiscard]] EstimateResult estimate_imputation(const PanelDataset& data, const FirstStageSpec& first_stage,
                                                 const SecondStageSpec& second_stage);

/// One-step OLS of y on the treatment indicators absorbing unit and period
/// effects, with CR0 cluster-robust variance.
[[nodiscard]] EstimateResult estimate_twfe_naive(const PanelDataset& data, const SecondStageSpec& second_stage,
                                                 const FeOptions& options = {1e-12, 10'000});

struct WeightCell {
    int group = 0;          // first treated period
    int period = 0;
    std::size_t n_rows = 0;
    double weight = 0.0;
};

struct WeightDecomposition {
    std::vector<WeightCell> cells;   // sorted by (group, period)
    double sum_weights = 0.0;
    std::size_t n_negative = 0;
};

/// Weights the static TWFE coefficient places on every treated (group,
/// period) cell: w_gt = sum_cell w D~ / sum_treated w D~, with D~ the
/// two-way residualized treatment indicator.
/// Throws NoTreatedObservations, DegenerateDesign.
[[nodiscard]] WeightDecomposition compute_twfe_weights(const PanelDataset& data,
                                                       const FeOptions& options = {1e-12, 10'000});

}  // namespace tsdid
