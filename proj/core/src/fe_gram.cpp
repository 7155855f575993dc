#include <algorithm>
#include <cmath>
#include <string>

#include "tsdid/error.hpp"
#include "tsdid/inference.hpp"

namespace tsdid {
namespace {

constexpr Eigen::Index kMaxDenseBlock = 4000;
constexpr double kSchurPivot = 1e-12;

}  // namespace

FixedEffectsGram::FixedEffectsGram(const FeSpec& spec, const Eigen::VectorXd& weights) : spec_(&spec) {
    const std::size_t n = spec.n_rows();
    const std::size_t n_dims = spec.dimensions.size();
    if (n_dims == 0) throw Error(ErrorCode::InvalidArgument, "first-stage Gram needs at least one dimension");
    if (static_cast<std::size_t>(weights.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "first-stage Gram: weights length does not match design");
    }
    const Eigen::Index p = spec.covariates.cols();

    for (std::size_t d = 1; d < n_dims; ++d) {
        if (spec.dimensions[d].n_levels > spec.dimensions[big_dim_].n_levels) big_dim_ = d;
    }
    n_big_ = spec.dimensions[big_dim_].n_levels;

    std::vector<std::size_t> sample;
    sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (spec.in_sample(i) && weights[static_cast<Eigen::Index>(i)] > 0.0) sample.push_back(i);
    }
    if (sample.empty()) throw Error(ErrorCode::SingularFirstStageGram, "first-stage sample is empty");

    pinned_.assign(n_dims, -1);
    rest_offset_.assign(n_dims, -1);
    Eigen::Index offset = 0;
    for (std::size_t d = 0; d < n_dims; ++d) {
        if (d == big_dim_) continue;
        pinned_[d] = spec.dimensions[d].level_of_row[sample.front()];
        rest_offset_[d] = offset;
        offset += spec.dimensions[d].n_levels - 1;
    }
    cov_offset_ = offset;
    n_rest_ = offset + p;
    if (n_rest_ > kMaxDenseBlock) {
        throw Error(ErrorCode::InvalidArgument,
                    "first-stage design has " + std::to_string(n_rest_) +
                        " parameters outside its largest dimension; at most " + std::to_string(kMaxDenseBlock) +
                        " are supported by the variance estimator");
    }

    const Factor& big = spec.dimensions[big_dim_];
    big_diag_ = Eigen::VectorXd::Zero(n_big_);
    for (std::size_t i : sample) big_diag_[big.level_of_row[i]] += weights[static_cast<Eigen::Index>(i)];
    for (Eigen::Index u = 0; u < n_big_; ++u) {
        if (!(big_diag_[u] > 0.0)) {
            const std::string label = static_cast<std::size_t>(u) < big.level_labels.size()
                                          ? big.level_labels[static_cast<std::size_t>(u)]
                                          : std::to_string(u);
            throw Error(ErrorCode::SingularFirstStageGram,
                        big.name + " '" + label + "' has no first-stage observations");
        }
    }

    // Sample rows grouped by level of the big dimension.
    std::vector<std::size_t> start(static_cast<std::size_t>(n_big_) + 1, 0);
    for (std::size_t i : sample) ++start[static_cast<std::size_t>(big.level_of_row[i]) + 1];
    for (std::size_t u = 0; u < static_cast<std::size_t>(n_big_); ++u) start[u + 1] += start[u];
    std::vector<std::size_t> by_level(sample.size());
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        for (std::size_t i : sample) by_level[fill[static_cast<std::size_t>(big.level_of_row[i])]++] = i;
    }

    Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(n_rest_, n_rest_);
    std::vector<double> acc(static_cast<std::size_t>(n_rest_), 0.0);
    std::vector<char> touched_flag(static_cast<std::size_t>(n_rest_), 0);
    std::vector<Eigen::Index> touched;
    std::vector<std::pair<Eigen::Index, double>> entries;
    coupling_start_.assign(static_cast<std::size_t>(n_big_) + 1, 0);

    for (Eigen::Index u = 0; u < n_big_; ++u) {
        touched.clear();
        for (std::size_t pos = start[static_cast<std::size_t>(u)]; pos < start[static_cast<std::size_t>(u) + 1]; ++pos) {
            const std::size_t i = by_level[pos];
            const double w = weights[static_cast<Eigen::Index>(i)];
            entries.clear();
            for (std::size_t d = 0; d < n_dims; ++d) {
                if (d == big_dim_) continue;
                const int c = column_of(d, spec.dimensions[d].level_of_row[i]);
                if (c >= 0) entries.emplace_back(c, 1.0);
            }
            for (Eigen::Index j = 0; j < p; ++j) {
                entries.emplace_back(cov_offset_ + j, spec.covariates(static_cast<Eigen::Index>(i), j));
            }
            for (const auto& [a, va] : entries) {
                for (const auto& [b, vb] : entries) schur(a, b) += w * va * vb;
                acc[static_cast<std::size_t>(a)] += w * va;
                if (!touched_flag[static_cast<std::size_t>(a)]) {
                    touched_flag[static_cast<std::size_t>(a)] = 1;
                    touched.push_back(a);
                }
            }
        }
        std::sort(touched.begin(), touched.end());
        const double inv_d = 1.0 / big_diag_[u];
        for (Eigen::Index a : touched) {
            const double ca = acc[static_cast<std::size_t>(a)];
            for (Eigen::Index b : touched) schur(a, b) -= ca * acc[static_cast<std::size_t>(b)] * inv_d;
        }
        for (Eigen::Index a : touched) {
            coupling_col_.push_back(a);
            coupling_val_.push_back(acc[static_cast<std::size_t>(a)]);
            acc[static_cast<std::size_t>(a)] = 0.0;
            touched_flag[static_cast<std::size_t>(a)] = 0;
        }
        coupling_start_[static_cast<std::size_t>(u) + 1] = coupling_col_.size();
    }

    if (n_rest_ > 0) {
        schur = (0.5 * (schur + schur.transpose())).eval();
        schur_.compute(schur);
        const double scale = std::max(schur.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        if (schur_.info() != Eigen::Success || schur_.vectorD().minCoeff() <= kSchurPivot * scale) {
            throw Error(ErrorCode::SingularFirstStageGram,
                        "first-stage normal matrix is singular: the untreated sample does not identify every "
                        "fixed effect and covariate");
        }
    }
}

int FixedEffectsGram::column_of(std::size_t dim, int level) const {
    const int pin = pinned_[dim];
    if (level == pin) return -1;
    return static_cast<int>(rest_offset_[dim]) + (level < pin ? level : level - 1);
}

Eigen::MatrixXd FixedEffectsGram::solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != n_params()) throw Error(ErrorCode::InvalidArgument, "first-stage Gram solve: wrong rhs size");
    const Eigen::Index k = rhs.cols();
    Eigen::MatrixXd z(n_params(), k);
    Eigen::MatrixXd z_rest(n_rest_, k);
    if (n_rest_ > 0) {
        Eigen::MatrixXd t = rhs.bottomRows(n_rest_);
        for (Eigen::Index u = 0; u < n_big_; ++u) {
            const Eigen::RowVectorXd bu = rhs.row(u) / big_diag_[u];
            for (std::size_t e = coupling_start_[static_cast<std::size_t>(u)]; e < coupling_start_[static_cast<std::size_t>(u) + 1]; ++e) {
                t.row(coupling_col_[e]) -= coupling_val_[e] * bu;
            }
        }
        z_rest = schur_.solve(t);
        z.bottomRows(n_rest_) = z_rest;
    }
    for (Eigen::Index u = 0; u < n_big_; ++u) {
        Eigen::RowVectorXd r = rhs.row(u);
        for (std::size_t e = coupling_start_[static_cast<std::size_t>(u)]; e < coupling_start_[static_cast<std::size_t>(u) + 1]; ++e) {
            r -= coupling_val_[e] * z_rest.row(coupling_col_[e]);
        }
        z.row(u) = r / big_diag_[u];
    }
    return z;
}

Eigen::MatrixXd FixedEffectsGram::cross(const Eigen::MatrixXd& M, const Eigen::VectorXd& weights) const {
    const FeSpec& spec = *spec_;
    const std::size_t n = spec.n_rows();
    if (static_cast<std::size_t>(M.rows()) != n) throw Error(ErrorCode::InvalidArgument, "cross: row mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_params(), M.cols());
    const Factor& big = spec.dimensions[big_dim_];
    const Eigen::Index p = spec.covariates.cols();
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights[static_cast<Eigen::Index>(i)];
        if (w == 0.0) continue;
        const auto row = M.row(static_cast<Eigen::Index>(i));
        out.row(big.level_of_row[i]) += w * row;
        for (std::size_t d = 0; d < spec.dimensions.size(); ++d) {
            if (d == big_dim_) continue;
            const int c = column_of(d, spec.dimensions[d].level_of_row[i]);
            if (c >= 0) out.row(n_big_ + c) += w * row;
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            out.row(n_big_ + cov_offset_ + j) += w * spec.covariates(static_cast<Eigen::Index>(i), j) * row;
        }
    }
    return out;
}

void FixedEffectsGram::accumulate_row(std::size_t i, const Eigen::MatrixXd& Z, double scale,
                                      Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const {
    const FeSpec& spec = *spec_;
    out += scale * Z.row(spec.dimensions[big_dim_].level_of_row[i]);
    for (std::size_t d = 0; d < spec.dimensions.size(); ++d) {
        if (d == big_dim_) continue;
        const int c = column_of(d, spec.dimensions[d].level_of_row[i]);
        if (c >= 0) out += scale * Z.row(n_big_ + c);
    }
    for (Eigen::Index j = 0; j < spec.covariates.cols(); ++j) {
        out += scale * spec.covariates(static_cast<Eigen::Index>(i), j) * Z.row(n_big_ + cov_offset_ + j);
    }
}

}  // namespace tsdid
