#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tsdid/fe_solver.hpp"
#include "tsdid/panel.hpp"

namespace tsdid {

enum class InferenceMethod { Gmm, Bootstrap };

struct InferenceSpec {
    InferenceMethod method = InferenceMethod::Gmm;
    int n_bootstraps = 250;
    std::uint64_t seed = 0;
    // Multiply the clustered meat by G / (G - 1).
    bool cluster_correction = false;
    // Bootstrap worker threads; 0 uses every hardware thread.
    int threads = 0;
};

/// Factorized normal matrix X10' W X10 of a fixed-effects design restricted
/// to its sample rows, without forming the dummy matrix.
///
/// Parameters are ordered as: levels of the largest dimension, then the
/// remaining levels of every other dimension (one pinned level each
/// dropped), then covariates. The largest dimension's block is diagonal and
/// is eliminated by a Schur complement onto the (small, dense) rest.
class FixedEffectsGram {
public:
    /// Throws SingularFirstStageGram when the sample does not identify every
    /// parameter, InvalidArgument when the dense block would be too large.
    FixedEffectsGram(const FeSpec& spec, const Eigen::VectorXd& weights);

    [[nodiscard]] Eigen::Index n_params() const { return n_big_ + n_rest_; }

    /// A^{-1} B for a parameter-space right-hand side (n_params x k).
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

    /// X1' diag(w) M summed over every row of the design (not only the sample).
    [[nodiscard]] Eigen::MatrixXd cross(const Eigen::MatrixXd& M, const Eigen::VectorXd& weights) const;

    /// Adds scale * (row i of X1) * Z to `out` (a 1 x k row).
    void accumulate_row(std::size_t i, const Eigen::MatrixXd& Z, double scale, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const;

private:
    int column_of(std::size_t dim, int level) const;

    const FeSpec* spec_;
    std::size_t big_dim_ = 0;
    Eigen::Index n_big_ = 0;
    Eigen::Index n_rest_ = 0;
    std::vector<int> pinned_;                  // per dimension; -1 for the big one
    std::vector<Eigen::Index> rest_offset_;    // per dimension start column in the rest block
    Eigen::Index cov_offset_ = 0;
    Eigen::VectorXd big_diag_;
    // Sparse coupling C (big levels x rest), CSR.
    std::vector<std::size_t> coupling_start_;
    std::vector<Eigen::Index> coupling_col_;
    std::vector<double> coupling_val_;
    Eigen::LDLT<Eigen::MatrixXd> schur_;
};

/// Pieces of the two-stage sandwich (X2'X2)^{-1} (sum_g W_g W_g') (X2'X2)^{-1}.
struct VcovComponents {
    Eigen::MatrixXd bread;   // (X2' W X2)^{-1}
    Eigen::MatrixXd meat;    // sum_g W_g W_g'
    // (X10' W X10)^{-1} X1' W X2: the first-stage correction applied to every
    // untreated row's residual contribution.
    Eigen::MatrixXd first_stage_correction;
};

struct GmmInputs {
    const FeSpec* first_stage = nullptr;        // sample_mask marks the untreated rows
    const Eigen::MatrixXd* second_design = nullptr;
    Eigen::VectorXd first_residuals;            // zero on rows outside the first-stage sample
    Eigen::VectorXd second_residuals;
    std::span<const int> clusters;
    std::size_t n_clusters = 0;
    Eigen::VectorXd weights;
};

/// W_g = X2g' e2g - (X2' X1)(X10' X10)^{-1} (X10g' e1g), with weights entering
/// as sqrt(w) on every row. Throws SingularSecondStageGram / SingularFirstStageGram.
[[nodiscard]] VcovComponents gmm_components(const GmmInputs& in);
[[nodiscard]] Eigen::MatrixXd gmm_vcov(const GmmInputs& in, bool cluster_correction = false);

/// CR0 cluster-robust sandwich bread * sum_g (X_g' W e_g)(X_g' W e_g)' * bread.
[[nodiscard]] Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                                  std::span<const int> clusters, std::size_t n_clusters,
                                                  const Eigen::VectorXd& weights, const Eigen::MatrixXd& bread,
                                                  bool cluster_correction = false);

/// Copy of `data` made of the clusters listed in `draws` (with repetition).
/// Each draw becomes a distinct cluster and its units distinct units.
/// Throws InvalidArgument when units are not nested within clusters.
[[nodiscard]] PanelDataset resample_clusters(const PanelDataset& data, std::span<const int> draws);

struct BootstrapResult {
    Eigen::MatrixXd vcov;
    int n_reps = 0;
    int n_failed = 0;
};

using EstimateFn = std::function<Eigen::VectorXd(const PanelDataset&)>;

/// Pairs cluster bootstrap: resamples clusters with replacement, reruns
/// `estimate`, returns the empirical covariance of the replicate vectors.
/// Replicates whose estimate throws tsdid::Error (or changes length) are
/// skipped; more than 20% skipped raises TooManyFailedReplicates.
/// Replicate r draws from its own stream seeded by (seed, r), so the result
/// does not depend on the thread count.
[[nodiscard]] BootstrapResult bootstrap_vcov(const PanelDataset& data, const EstimateFn& estimate,
                                             const InferenceSpec& spec);

}  // namespace tsdid
