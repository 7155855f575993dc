#include <cmath>
#include <map>
#include <utility>

#include "tsdid/error.hpp"
#include "tsdid/estimator.hpp"

namespace tsdid {
namespace {

constexpr double kCollinearShare = 1e-10;

Eigen::VectorXd weight_vector(const PanelDataset& data) {
    const auto w = data.weights();
    return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

std::vector<Factor> two_way_factors(const PanelDataset& data) {
    return build_fe_spec(data, FirstStageSpec{}).dimensions;
}

DemeanResult demean_or_throw(const Eigen::MatrixXd& cols, const PanelDataset& data, const Eigen::VectorXd& w,
                             const FeOptions& options) {
    DemeanResult dm = demean(cols, two_way_factors(data), {}, w, options);
    if (!dm.converged) {
        throw Error(ErrorCode::DidNotConverge,
                    "two-way demeaning did not converge after " + std::to_string(dm.iterations) + " sweeps");
    }
    return dm;
}

}  // namespace

EstimateResult estimate_twfe_naive(const PanelDataset& data, const SecondStageSpec& second_stage,
                                   const FeOptions& options) {
    if (data.n_treated() == 0) {
        throw Error(ErrorCode::NoTreatedObservations, "no observation is treated; there is no effect to estimate");
    }
    const SecondStageDesign design = build_second_stage(data, second_stage);
    const auto k = static_cast<Eigen::Index>(design.terms.size());
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "every event time is a reference level; nothing to estimate");
    const Eigen::Index n = design.X.rows();
    const Eigen::VectorXd w = weight_vector(data);

    Eigen::MatrixXd cols(n, k + 1);
    for (Eigen::Index i = 0; i < n; ++i) cols(i, 0) = data.row(static_cast<std::size_t>(i)).outcome;
    cols.rightCols(k) = design.X.rightCols(k);
    const DemeanResult dm = demean_or_throw(cols, data, w, options);

    // Indicators absorbed by the fixed effects carry no information.
    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < k; ++j) {
        const double raw = design.X.col(j + 1).squaredNorm();
        const double res = dm.residuals.col(j + 1).squaredNorm();
        if (res > kCollinearShare * raw) kept.push_back(j);
    }
    if (kept.empty()) {
        if (second_stage.kind == SecondStageKind::Static) {
            throw Error(ErrorCode::DegenerateDesign, "treatment indicator is collinear with the unit and period effects");
        }
        throw Error(ErrorCode::AllColumnsCollinear, "every event-time indicator is collinear with the fixed effects");
    }
    Eigen::MatrixXd D(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j) D.col(static_cast<Eigen::Index>(j)) = dm.residuals.col(kept[j] + 1);

    const DenseOlsFit ols = dense_ols(dm.residuals.col(0), D, w);
    Eigen::MatrixXd Dr(n, static_cast<Eigen::Index>(ols.retained_columns.size()));
    EstimateResult result;
    result.estimator = "twfe";
    result.kind = second_stage.kind;
    result.point.resize(Dr.cols());
    for (std::size_t j = 0; j < ols.retained_columns.size(); ++j) {
        const int c = ols.retained_columns[j];
        Dr.col(static_cast<Eigen::Index>(j)) = D.col(c);
        result.terms.push_back(design.terms[static_cast<std::size_t>(kept[static_cast<std::size_t>(c)])]);
        result.point[static_cast<Eigen::Index>(j)] = ols.coefficients[c];
    }
    result.vcov = cluster_robust_vcov(Dr, ols.residuals, data.cluster_of_row(), data.n_clusters(), w,
                                      ols.gram_inverse, false);
    result.se = result.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    result.n_obs = data.n_rows();
    result.n_clusters = data.n_clusters();

    if (second_stage.horizon) {
        std::vector<Eigen::Index> keep;
        for (std::size_t j = 0; j < result.terms.size(); ++j) {
            if (in_horizon(result.terms[j], second_stage)) keep.push_back(static_cast<Eigen::Index>(j));
        }
        const auto m = static_cast<Eigen::Index>(keep.size());
        EstimateResult cut = result;
        cut.terms.clear();
        cut.point.resize(m);
        cut.se.resize(m);
        cut.vcov.resize(m, m);
        for (Eigen::Index a = 0; a < m; ++a) {
            cut.terms.push_back(result.terms[static_cast<std::size_t>(keep[static_cast<std::size_t>(a)])]);
            cut.point[a] = result.point[keep[static_cast<std::size_t>(a)]];
            cut.se[a] = result.se[keep[static_cast<std::size_t>(a)]];
            for (Eigen::Index b = 0; b < m; ++b) {
                cut.vcov(a, b) = result.vcov(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
            }
        }
        return cut;
    }
    return result;
}

WeightDecomposition compute_twfe_weights(const PanelDataset& data, const FeOptions& options) {
    if (data.n_treated() == 0) {
        throw Error(ErrorCode::NoTreatedObservations, "no observation is treated; there are no weights to compute");
    }
    const auto n = static_cast<Eigen::Index>(data.n_rows());
    const Eigen::VectorXd w = weight_vector(data);
    Eigen::MatrixXd d(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) d(i, 0) = data.row(static_cast<std::size_t>(i)).treated ? 1.0 : 0.0;
    const Eigen::VectorXd dt = demean_or_throw(d, data, w, options).residuals.col(0);

    const double raw = w.dot(d.col(0));
    const double res = w.dot(dt.cwiseProduct(dt));
    if (!(res > kCollinearShare * raw)) {
        throw Error(ErrorCode::DegenerateDesign, "treatment indicator is collinear with the unit and period effects");
    }

    std::map<std::pair<int, int>, WeightCell> cells;
    double denom = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        const auto& obs = data.row(i);
        if (!obs.treated) continue;
        const double v = w[static_cast<Eigen::Index>(i)] * dt[static_cast<Eigen::Index>(i)];
        const int g = *data.group_of_unit(obs.unit).first_period();
        WeightCell& cell = cells[{g, obs.time}];
        cell.group = g;
        cell.period = obs.time;
        ++cell.n_rows;
        cell.weight += v;
        denom += v;
    }

    WeightDecomposition out;
    out.cells.reserve(cells.size());
    for (auto& [key, cell] : cells) {
        cell.weight /= denom;
        out.sum_weights += cell.weight;
        if (cell.weight < 0.0) ++out.n_negative;
        out.cells.push_back(cell);
    }
    return out;
}

}  // namespace tsdid
