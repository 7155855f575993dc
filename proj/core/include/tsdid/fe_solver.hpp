#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tsdid {

/// One categorical fixed-effect dimension (e.g. unit or period).
struct Factor {
    std::string name;
    std::vector<int> level_of_row;            // level id in [0, n_levels) for every row
    int n_levels = 0;
    std::vector<std::string> level_labels;    // optional, used in error messages
};

/// Fixed-effects regression design: absorbed factors, optional dense
/// covariates, and the subset of rows used for fitting.
struct FeSpec {
    std::vector<Factor> dimensions;
    Eigen::MatrixXd covariates;               // n_rows x p, p may be 0
    std::vector<std::string> covariate_names;
    std::vector<char> sample_mask;            // nonzero = used for fitting; empty = all rows

    [[nodiscard]] std::size_t n_rows() const {
        return dimensions.empty() ? static_cast<std::size_t>(covariates.rows()) : dimensions.front().level_of_row.size();
    }
    [[nodiscard]] bool in_sample(std::size_t row) const { return sample_mask.empty() || sample_mask[row] != 0; }
};

struct FeOptions {
    double tol = 1e-8;       // max |level-effect update| at convergence
    int max_iter = 10'000;   // alternating-projection sweeps
};

struct FirstStageFit {
    // Per dimension, effect of each level. NaN for levels without positive
    // weight in the fitting sample. The intercept lives in dimension 0; in
    // every later dimension the first-observed level is pinned to zero.
    std::vector<Eigen::VectorXd> level_effects;
    std::vector<std::vector<char>> level_observed;
    std::vector<int> pinned_level;                 // per dimension, -1 for dimension 0
    // Connected component of each level in the sample's level graph.
    std::vector<std::vector<int>> level_component;
    Eigen::VectorXd covariate_coefs;
    int iterations = 0;
    bool converged = false;
    double max_abs_update = 0.0;
    // Weighted residual sum of squares of the outcome after each sweep.
    std::vector<double> rss_trace;
};

/// Weighted least squares of y on the absorbed factors (and covariates) over
/// the rows selected by spec.sample_mask, by Gauss-Seidel alternating
/// projections. Does not throw on non-convergence; check `converged`.
/// Throws SingularCovariates, NoRowsSelected, InvalidArgument.
[[nodiscard]] FirstStageFit fit_fixed_effects(const Eigen::VectorXd& y, const FeSpec& spec,
                                              const Eigen::VectorXd& weights, const FeOptions& options = {});

/// Fitted values sum(effect[level]) + covariates * coefs for every row of
/// spec. Throws UnseenLevel for rows whose levels were never fitted.
[[nodiscard]] Eigen::VectorXd predict(const FirstStageFit& fit, const FeSpec& spec);

struct DemeanResult {
    Eigen::MatrixXd residuals;   // rows outside the mask are left unchanged
    int iterations = 0;
    bool converged = false;
    double max_abs_update = 0.0;
};

/// Residualizes every column on the factors over the masked rows.
[[nodiscard]] DemeanResult demean(const Eigen::MatrixXd& columns, const std::vector<Factor>& dimensions,
                                  std::span<const char> sample_mask, const Eigen::VectorXd& weights,
                                  const FeOptions& options = {});

}  // namespace tsdid
