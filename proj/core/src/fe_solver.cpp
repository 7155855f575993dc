#include "tsdid/fe_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tsdid/error.hpp"

namespace tsdid {
namespace {

// Relative norm below which a demeaned covariate is treated as lying in the
// fixed-effects span.
constexpr double kFeCollinearity = 1e-9;
constexpr double kPivotThreshold = 1e-10;

void check_design(const std::vector<Factor>& dims, std::size_t n, std::span<const char> mask,
                  const Eigen::VectorXd& weights) {
    if (static_cast<std::size_t>(weights.size()) != n) {
        throw Error(ErrorCode::InvalidArgument, "weights length does not match design rows");
    }
    if (!mask.empty() && mask.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "sample mask length does not match design rows");
    }
    for (const auto& f : dims) {
        if (f.level_of_row.size() != n) {
            throw Error(ErrorCode::InvalidArgument, "factor '" + f.name + "' length does not match design rows");
        }
        for (int l : f.level_of_row) {
            if (l < 0 || l >= f.n_levels) {
                throw Error(ErrorCode::InvalidArgument, "factor '" + f.name + "' has a level outside [0, n_levels)");
            }
        }
    }
}

// Sample rows of a factor design in compact form, with the sweep kernel.
class Projector {
public:
    Projector(const std::vector<Factor>& dims, std::span<const char> mask, const Eigen::VectorXd& weights) {
        const std::size_t n = static_cast<std::size_t>(weights.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (mask.empty() || mask[i] != 0) rows_.push_back(i);
        }
        w_.resize(rows_.size());
        total_weight_ = 0.0;
        for (std::size_t j = 0; j < rows_.size(); ++j) {
            w_[j] = weights[static_cast<Eigen::Index>(rows_[j])];
            total_weight_ += w_[j];
        }
        levels_.resize(dims.size());
        inv_wsum_.resize(dims.size());
        n_levels_.resize(dims.size());
        for (std::size_t d = 0; d < dims.size(); ++d) {
            n_levels_[d] = dims[d].n_levels;
            levels_[d].resize(rows_.size());
            std::vector<double> wsum(static_cast<std::size_t>(dims[d].n_levels), 0.0);
            for (std::size_t j = 0; j < rows_.size(); ++j) {
                const int l = dims[d].level_of_row[rows_[j]];
                levels_[d][j] = l;
                wsum[static_cast<std::size_t>(l)] += w_[j];
            }
            inv_wsum_[d].resize(wsum.size());
            for (std::size_t l = 0; l < wsum.size(); ++l) inv_wsum_[d][l] = wsum[l] > 0.0 ? 1.0 / wsum[l] : 0.0;
        }
        acc_.resize(static_cast<std::size_t>(
            n_levels_.empty() ? 0 : *std::max_element(n_levels_.begin(), n_levels_.end())));
    }

    [[nodiscard]] const std::vector<std::size_t>& rows() const { return rows_; }
    [[nodiscard]] double total_weight() const { return total_weight_; }
    [[nodiscard]] std::size_t n_dims() const { return levels_.size(); }
    [[nodiscard]] bool observed(std::size_t d, int level) const { return inv_wsum_[d][static_cast<std::size_t>(level)] > 0.0; }
    [[nodiscard]] int level(std::size_t d, std::size_t j) const { return levels_[d][j]; }
    [[nodiscard]] double weight(std::size_t j) const { return w_[j]; }

    // One Gauss-Seidel pass over all dimensions. `r` holds the current
    // residual of every sample row; `effects` (optional) accumulates the
    // level effects. Returns the largest absolute level update.
    double sweep(std::vector<double>& r, std::vector<Eigen::VectorXd>* effects) {
        double max_update = 0.0;
        const std::size_t m = rows_.size();
        for (std::size_t d = 0; d < levels_.size(); ++d) {
            const auto nl = static_cast<std::size_t>(n_levels_[d]);
            std::fill(acc_.begin(), acc_.begin() + static_cast<std::ptrdiff_t>(nl), 0.0);
            const int* lev = levels_[d].data();
            for (std::size_t j = 0; j < m; ++j) acc_[static_cast<std::size_t>(lev[j])] += w_[j] * r[j];
            for (std::size_t l = 0; l < nl; ++l) {
                acc_[l] *= inv_wsum_[d][l];
                max_update = std::max(max_update, std::abs(acc_[l]));
            }
            for (std::size_t j = 0; j < m; ++j) r[j] -= acc_[static_cast<std::size_t>(lev[j])];
            if (effects != nullptr) {
                auto& e = (*effects)[d];
                for (std::size_t l = 0; l < nl; ++l) e[static_cast<Eigen::Index>(l)] += acc_[l];
            }
        }
        return max_update;
    }

    [[nodiscard]] double rss(const std::vector<double>& r) const {
        double s = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) s += w_[j] * r[j] * r[j];
        return s;
    }

private:
    std::vector<std::size_t> rows_;
    std::vector<double> w_;
    double total_weight_ = 0.0;
    std::vector<std::vector<int>> levels_;
    std::vector<std::vector<double>> inv_wsum_;
    std::vector<int> n_levels_;
    std::vector<double> acc_;
};

struct ColumnSolve {
    std::vector<double> residual;
    std::vector<Eigen::VectorXd> effects;
    int iterations = 0;
    bool converged = false;
    double max_abs_update = 0.0;
};

ColumnSolve solve_column(Projector& proj, const Eigen::Ref<const Eigen::VectorXd>& column,
                         const std::vector<Factor>& dims, const FeOptions& options, bool track_effects,
                         std::vector<double>* rss_trace) {
    ColumnSolve out;
    const auto& rows = proj.rows();
    out.residual.resize(rows.size());
    for (std::size_t j = 0; j < rows.size(); ++j) out.residual[j] = column[static_cast<Eigen::Index>(rows[j])];
    if (track_effects) {
        for (const auto& f : dims) out.effects.emplace_back(Eigen::VectorXd::Zero(f.n_levels));
    }
    if (dims.empty()) {
        out.converged = true;
        return out;
    }
    for (int it = 1; it <= options.max_iter; ++it) {
        out.max_abs_update = proj.sweep(out.residual, track_effects ? &out.effects : nullptr);
        out.iterations = it;
        if (rss_trace != nullptr) rss_trace->push_back(proj.rss(out.residual));
        if (out.max_abs_update <= options.tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

std::vector<std::vector<int>> connected_components(const Projector& proj, const std::vector<Factor>& dims) {
    std::vector<int> offset(dims.size() + 1, 0);
    for (std::size_t d = 0; d < dims.size(); ++d) offset[d + 1] = offset[d] + dims[d].n_levels;
    std::vector<int> parent(static_cast<std::size_t>(offset.back()));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (std::size_t j = 0; j < proj.rows().size(); ++j) {
        if (proj.weight(j) <= 0.0) continue;
        const int root0 = find(offset[0] + proj.level(0, j));
        for (std::size_t d = 1; d < dims.size(); ++d) {
            const int root = find(offset[d] + proj.level(d, j));
            if (root != root0) parent[static_cast<std::size_t>(root)] = root0;
        }
    }
    std::vector<std::vector<int>> comp(dims.size());
    for (std::size_t d = 0; d < dims.size(); ++d) {
        comp[d].resize(static_cast<std::size_t>(dims[d].n_levels));
        for (int l = 0; l < dims[d].n_levels; ++l) comp[d][static_cast<std::size_t>(l)] = find(offset[d] + l);
    }
    return comp;
}

std::string level_name(const Factor& f, int level) {
    if (static_cast<std::size_t>(level) < f.level_labels.size()) return f.level_labels[static_cast<std::size_t>(level)];
    return std::to_string(level);
}

}  // namespace

FirstStageFit fit_fixed_effects(const Eigen::VectorXd& y, const FeSpec& spec, const Eigen::VectorXd& weights,
                                const FeOptions& options) {
    if (!(options.tol > 0.0) || options.max_iter < 1) {
        throw Error(ErrorCode::InvalidArgument, "fixed-effects solver needs tol > 0 and max_iter >= 1");
    }
    const std::size_t n = static_cast<std::size_t>(y.size());
    if (spec.dimensions.empty()) throw Error(ErrorCode::InvalidArgument, "at least one fixed-effect dimension is required");
    check_design(spec.dimensions, n, spec.sample_mask, weights);
    const auto p = spec.covariates.cols();
    if (p > 0 && static_cast<std::size_t>(spec.covariates.rows()) != n) {
        throw Error(ErrorCode::InvalidArgument, "covariate matrix rows do not match design rows");
    }

    Projector proj(spec.dimensions, spec.sample_mask, weights);
    if (proj.rows().empty() || !(proj.total_weight() > 0.0)) {
        throw Error(ErrorCode::NoRowsSelected, "fixed-effects sample has no rows with positive weight");
    }

    FirstStageFit fit;
    ColumnSolve ys = solve_column(proj, y, spec.dimensions, options, true, &fit.rss_trace);
    fit.iterations = ys.iterations;
    fit.converged = ys.converged;
    fit.max_abs_update = ys.max_abs_update;
    std::vector<Eigen::VectorXd> effects = std::move(ys.effects);

    if (p > 0) {
        const auto& rows = proj.rows();
        const auto m = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd xt(m, p);
        Eigen::VectorXd yt(m);
        Eigen::VectorXd sw(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            sw[j] = std::sqrt(proj.weight(static_cast<std::size_t>(j)));
            yt[j] = sw[j] * ys.residual[static_cast<std::size_t>(j)];
        }
        std::vector<std::vector<Eigen::VectorXd>> x_effects;
        for (Eigen::Index c = 0; c < p; ++c) {
            ColumnSolve xs = solve_column(proj, spec.covariates.col(c), spec.dimensions, options, true, nullptr);
            fit.iterations = std::max(fit.iterations, xs.iterations);
            fit.converged = fit.converged && xs.converged;
            fit.max_abs_update = std::max(fit.max_abs_update, xs.max_abs_update);
            double raw = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                const double v = spec.covariates(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]), c);
                raw += sw[j] * sw[j] * v * v;
                xt(j, c) = sw[j] * xs.residual[static_cast<std::size_t>(j)];
            }
            const std::string name = static_cast<std::size_t>(c) < spec.covariate_names.size()
                                         ? spec.covariate_names[static_cast<std::size_t>(c)]
                                         : "covariate " + std::to_string(c);
            if (xt.col(c).squaredNorm() <= kFeCollinearity * kFeCollinearity * raw || raw == 0.0) {
                throw Error(ErrorCode::SingularCovariates,
                            "covariate '" + name + "' is collinear with the fixed effects");
            }
            x_effects.push_back(std::move(xs.effects));
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xt);
        qr.setThreshold(kPivotThreshold);
        if (qr.rank() < p) {
            throw Error(ErrorCode::SingularCovariates, "first-stage covariates are collinear");
        }
        fit.covariate_coefs = qr.solve(yt);
        for (std::size_t d = 0; d < effects.size(); ++d) {
            for (Eigen::Index c = 0; c < p; ++c) effects[d] -= fit.covariate_coefs[c] * x_effects[static_cast<std::size_t>(c)][d];
        }
    } else {
        fit.covariate_coefs = Eigen::VectorXd::Zero(0);
    }

    // First-observed level of every later dimension is pinned to zero; the
    // shift is absorbed into dimension 0.
    fit.pinned_level.assign(spec.dimensions.size(), -1);
    std::size_t first_row = 0;
    while (first_row < proj.rows().size() && proj.weight(first_row) <= 0.0) ++first_row;
    for (std::size_t d = 1; d < spec.dimensions.size(); ++d) {
        const int pin = proj.level(d, first_row);
        fit.pinned_level[d] = pin;
        const double shift = effects[d][pin];
        effects[d].array() -= shift;
        effects[0].array() += shift;
    }

    fit.level_component = connected_components(proj, spec.dimensions);
    fit.level_observed.resize(spec.dimensions.size());
    for (std::size_t d = 0; d < spec.dimensions.size(); ++d) {
        auto& obs = fit.level_observed[d];
        obs.resize(static_cast<std::size_t>(spec.dimensions[d].n_levels));
        for (int l = 0; l < spec.dimensions[d].n_levels; ++l) {
            obs[static_cast<std::size_t>(l)] = proj.observed(d, l) ? 1 : 0;
            if (!obs[static_cast<std::size_t>(l)]) effects[d][l] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    fit.level_effects = std::move(effects);
    return fit;
}

Eigen::VectorXd predict(const FirstStageFit& fit, const FeSpec& spec) {
    const std::size_t n = spec.n_rows();
    const std::size_t n_dims = spec.dimensions.size();
    if (fit.level_effects.size() != n_dims) {
        throw Error(ErrorCode::InvalidArgument, "fit and design have different numbers of dimensions");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const int root = fit.level_component[0][static_cast<std::size_t>(spec.dimensions[0].level_of_row[i])];
        double v = 0.0;
        for (std::size_t d = 0; d < n_dims; ++d) {
            const Factor& f = spec.dimensions[d];
            const int l = f.level_of_row[i];
            if (!fit.level_observed[d][static_cast<std::size_t>(l)]) {
                throw Error(ErrorCode::UnseenLevel,
                            f.name + " '" + level_name(f, l) +
                                "' has no untreated observations, so its fixed effect is not identified; "
                                "drop this " + f.name + " from the sample");
            }
            if (fit.level_component[d][static_cast<std::size_t>(l)] != root) {
                throw Error(ErrorCode::UnseenLevel,
                            f.name + " '" + level_name(f, l) + "' and " + spec.dimensions[0].name + " '" +
                                level_name(spec.dimensions[0], spec.dimensions[0].level_of_row[i]) +
                                "' are never linked through untreated observations; the combination is not identified");
            }
            v += fit.level_effects[d][l];
        }
        out[static_cast<Eigen::Index>(i)] = v;
    }
    if (spec.covariates.cols() > 0) out += spec.covariates * fit.covariate_coefs;
    return out;
}

DemeanResult demean(const Eigen::MatrixXd& columns, const std::vector<Factor>& dimensions,
                    std::span<const char> sample_mask, const Eigen::VectorXd& weights, const FeOptions& options) {
    if (!(options.tol > 0.0) || options.max_iter < 1) {
        throw Error(ErrorCode::InvalidArgument, "demeaning needs tol > 0 and max_iter >= 1");
    }
    const std::size_t n = static_cast<std::size_t>(columns.rows());
    check_design(dimensions, n, sample_mask, weights);
    Projector proj(dimensions, sample_mask, weights);
    DemeanResult out;
    out.residuals = columns;
    out.converged = true;
    const auto& rows = proj.rows();
    for (Eigen::Index c = 0; c < columns.cols(); ++c) {
        ColumnSolve cs = solve_column(proj, columns.col(c), dimensions, options, false, nullptr);
        for (std::size_t j = 0; j < rows.size(); ++j) out.residuals(static_cast<Eigen::Index>(rows[j]), c) = cs.residual[j];
        out.iterations = std::max(out.iterations, cs.iterations);
        out.converged = out.converged && cs.converged;
        out.max_abs_update = std::max(out.max_abs_update, cs.max_abs_update);
    }
    return out;
}

}  // namespace tsdid
