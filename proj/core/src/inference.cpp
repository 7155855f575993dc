#include "tsdid/inference.hpp"

#include "tsdid/error.hpp"

namespace tsdid {
namespace {

Eigen::MatrixXd inverse_gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& weights) {
    const Eigen::MatrixXd xtwx = X.transpose() * weights.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    const double scale = std::max(xtwx.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * scale) {
        throw Error(ErrorCode::SingularSecondStageGram, "second-stage design X2'X2 is singular");
    }
    Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    return 0.5 * (inv + inv.transpose());
}

void check_clusters(std::span<const int> clusters, std::size_t n_rows, std::size_t n_clusters) {
    if (clusters.size() != n_rows) throw Error(ErrorCode::InvalidArgument, "cluster assignment length does not match rows");
    for (int c : clusters) {
        if (c < 0 || static_cast<std::size_t>(c) >= n_clusters) {
            throw Error(ErrorCode::InvalidArgument, "cluster index out of range");
        }
    }
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& meat, std::size_t n_clusters,
                         bool correction) {
    Eigen::MatrixXd v = bread * meat * bread;
    v = (0.5 * (v + v.transpose())).eval();
    if (correction && n_clusters > 1) {
        v *= static_cast<double>(n_clusters) / static_cast<double>(n_clusters - 1);
    }
    return v;
}

}  // namespace

VcovComponents gmm_components(const GmmInputs& in) {
    if (in.first_stage == nullptr || in.second_design == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "gmm_vcov: missing design");
    }
    const FeSpec& fs = *in.first_stage;
    const Eigen::MatrixXd& X2 = *in.second_design;
    const std::size_t n = static_cast<std::size_t>(X2.rows());
    if (fs.n_rows() != n || static_cast<std::size_t>(in.first_residuals.size()) != n ||
        static_cast<std::size_t>(in.second_residuals.size()) != n || static_cast<std::size_t>(in.weights.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "gmm_vcov: residuals, weights and designs must align");
    }
    check_clusters(in.clusters, n, in.n_clusters);

    VcovComponents out;
    out.bread = inverse_gram(X2, in.weights);

    const FixedEffectsGram gram(fs, in.weights);
    const Eigen::MatrixXd cross = gram.cross(X2, in.weights);
    out.first_stage_correction = gram.solve(cross);

    const Eigen::Index k = X2.cols();
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(in.n_clusters), k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double w = in.weights[ii];
        if (w == 0.0) continue;
        auto row = scores.row(in.clusters[i]);
        row += (w * in.second_residuals[ii]) * X2.row(ii);
        if (fs.in_sample(i)) gram.accumulate_row(i, out.first_stage_correction, -w * in.first_residuals[ii], row);
    }
    out.meat = scores.transpose() * scores;
    return out;
}

Eigen::MatrixXd gmm_vcov(const GmmInputs& in, bool cluster_correction) {
    const VcovComponents c = gmm_components(in);
    return sandwich(c.bread, c.meat, in.n_clusters, cluster_correction);
}

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                    std::span<const int> clusters, std::size_t n_clusters,
                                    const Eigen::VectorXd& weights, const Eigen::MatrixXd& bread,
                                    bool cluster_correction) {
    const std::size_t n = static_cast<std::size_t>(X.rows());
    if (static_cast<std::size_t>(residuals.size()) != n || static_cast<std::size_t>(weights.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "cluster_robust_vcov: sizes do not align");
    }
    check_clusters(clusters, n, n_clusters);
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_clusters), X.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        scores.row(clusters[i]) += (weights[ii] * residuals[ii]) * X.row(ii);
    }
    const Eigen::MatrixXd meat = scores.transpose() * scores;
    return sandwich(bread, meat, n_clusters, cluster_correction);
}

}  // namespace tsdid
