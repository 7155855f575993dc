#include "tsdid/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tsdid/error.hpp"

namespace tsdid {
namespace {

Eigen::VectorXd outcome_vector(const PanelDataset& data) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.n_rows()));
    for (std::size_t i = 0; i < data.n_rows(); ++i) y[static_cast<Eigen::Index>(i)] = data.row(i).outcome;
    return y;
}

Eigen::VectorXd weight_vector(const PanelDataset& data) {
    const auto w = data.weights();
    return Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

struct FirstStageResult {
    FeSpec design;
    FirstStageFit fit;
    Eigen::VectorXd adjusted;
};

FirstStageResult run_first_stage(const PanelDataset& data, const FirstStageSpec& spec) {
    if (data.n_treated() == 0) {
        throw Error(ErrorCode::NoTreatedObservations, "no observation is treated; there is no effect to estimate");
    }
    FirstStageResult out;
    out.design = build_fe_spec(data, spec, untreated_mask(data));
    const Eigen::VectorXd y = outcome_vector(data);
    out.fit = fit_fixed_effects(y, out.design, weight_vector(data), spec.solver);
    if (!out.fit.converged) {
        throw Error(ErrorCode::DidNotConverge,
                    "first stage did not converge after " + std::to_string(out.fit.iterations) +
                        " sweeps (last max update " + std::to_string(out.fit.max_abs_update) + ", tol " +
                        std::to_string(spec.solver.tol) + ")");
    }
    out.adjusted = y - predict(out.fit, out.design);
    return out;
}

ConvergenceInfo convergence_of(const FirstStageFit& fit) {
    return ConvergenceInfo{fit.iterations, fit.converged, fit.max_abs_update};
}

// Restricts a result to the terms inside the reporting window.
void apply_horizon(EstimateResult& result, const SecondStageSpec& spec) {
    std::vector<Eigen::Index> keep;
    for (std::size_t j = 0; j < result.terms.size(); ++j) {
        if (in_horizon(result.terms[j], spec)) keep.push_back(static_cast<Eigen::Index>(j));
    }
    if (keep.size() == result.terms.size()) return;
    std::vector<Term> terms;
    Eigen::VectorXd point(static_cast<Eigen::Index>(keep.size()));
    Eigen::VectorXd se(static_cast<Eigen::Index>(keep.size()));
    const bool has_vcov = result.vcov.size() > 0;
    Eigen::MatrixXd vcov(has_vcov ? static_cast<Eigen::Index>(keep.size()) : 0,
                         has_vcov ? static_cast<Eigen::Index>(keep.size()) : 0);
    for (std::size_t a = 0; a < keep.size(); ++a) {
        const auto ia = static_cast<Eigen::Index>(a);
        terms.push_back(result.terms[static_cast<std::size_t>(keep[a])]);
        point[ia] = result.point[keep[a]];
        se[ia] = result.se[keep[a]];
        if (has_vcov) {
            for (std::size_t b = 0; b < keep.size(); ++b) vcov(ia, static_cast<Eigen::Index>(b)) = result.vcov(keep[a], keep[b]);
        }
    }
    result.terms = std::move(terms);
    result.point = std::move(point);
    result.se = std::move(se);
    result.vcov = std::move(vcov);
}

Eigen::VectorXd standard_errors(const Eigen::MatrixXd& vcov) {
    return vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

FeSpec build_fe_spec(const PanelDataset& data, const FirstStageSpec& spec, std::vector<char> sample_mask) {
    const std::size_t n = data.n_rows();
    FeSpec fe;

    Factor first;
    if (spec.effects == FixedEffectsKind::Unit) {
        first.name = "unit";
        first.n_levels = static_cast<int>(data.n_units());
        first.level_of_row.resize(n);
        for (std::size_t i = 0; i < n; ++i) first.level_of_row[i] = data.row(i).unit;
        first.level_labels.reserve(data.n_units());
        for (std::size_t u = 0; u < data.n_units(); ++u) first.level_labels.push_back(data.unit_label(static_cast<int>(u)));
    } else {
        first.name = "group";
        std::map<std::optional<int>, int> level_of_group;  // nullopt (never) sorts first
        for (std::size_t u = 0; u < data.n_units(); ++u) level_of_group.emplace(data.group_of_unit(static_cast<int>(u)).first_period(), 0);
        int next = 0;
        for (auto& [g, lvl] : level_of_group) {
            lvl = next++;
            first.level_labels.push_back(g ? std::to_string(*g) : std::string("inf"));
        }
        first.n_levels = next;
        first.level_of_row.resize(n);
        for (std::size_t i = 0; i < n; ++i) first.level_of_row[i] = level_of_group.at(data.group_of_row(i).first_period());
    }

    Factor period;
    period.name = "period";
    period.n_levels = static_cast<int>(data.n_periods());
    period.level_of_row.assign(data.time_index_of_row().begin(), data.time_index_of_row().end());
    for (int t : data.periods()) period.level_labels.push_back(std::to_string(t));

    fe.dimensions.push_back(std::move(first));
    fe.dimensions.push_back(std::move(period));

    fe.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.covariates.size()));
    for (std::size_t j = 0; j < spec.covariates.size(); ++j) {
        const auto idx = data.find_covariate(spec.covariates[j]);
        if (!idx) throw Error(ErrorCode::MissingColumn, "covariate '" + spec.covariates[j] + "' is not in the dataset");
        const auto col = data.covariate(*idx);
        for (std::size_t i = 0; i < n; ++i) fe.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    fe.covariate_names = spec.covariates;
    fe.sample_mask = std::move(sample_mask);
    return fe;
}

TwoStageFit fit_two_stage(const PanelDataset& data, const FirstStageSpec& first_stage,
                          const SecondStageSpec& second_stage) {
    FirstStageResult fs = run_first_stage(data, first_stage);

    TwoStageFit out;
    out.first_residuals = fs.adjusted;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        if (!fs.design.in_sample(i)) out.first_residuals[static_cast<Eigen::Index>(i)] = 0.0;
    }
    out.design = build_second_stage(data, second_stage);
    if (out.design.terms.empty()) {
        throw Error(ErrorCode::InvalidArgument, "every event time is a reference level; nothing to estimate");
    }
    out.second_stage = dense_ols(fs.adjusted, out.design.X, weight_vector(data));

    const auto& retained = out.second_stage.retained_columns;
    out.retained_design.resize(out.design.X.rows(), static_cast<Eigen::Index>(retained.size()));
    for (std::size_t j = 0; j < retained.size(); ++j) {
        out.retained_design.col(static_cast<Eigen::Index>(j)) = out.design.X.col(retained[j]);
    }
    std::vector<double> points;
    for (int c : retained) {
        if (c == 0) continue;
        out.terms.push_back(out.design.terms[static_cast<std::size_t>(c - 1)]);
        points.push_back(out.second_stage.coefficients[c]);
    }
    if (out.terms.empty()) {
        throw Error(ErrorCode::DegenerateDesign, "every treatment indicator is collinear with the intercept");
    }
    out.point = Eigen::Map<const Eigen::VectorXd>(points.data(), static_cast<Eigen::Index>(points.size()));

    out.first_stage_design = std::move(fs.design);
    out.first_stage = std::move(fs.fit);
    out.adjusted_outcome = std::move(fs.adjusted);
    return out;
}

EstimateResult estimate_two_stage(const PanelDataset& data, const FirstStageSpec& first_stage,
                                  const SecondStageSpec& second_stage, const InferenceSpec& inference) {
    TwoStageFit fit = fit_two_stage(data, first_stage, second_stage);

    EstimateResult result;
    result.estimator = "two_stage";
    result.kind = second_stage.kind;
    result.terms = fit.terms;
    result.point = fit.point;
    result.n_obs = data.n_rows();
    result.n_clusters = data.n_clusters();
    result.method = inference.method;
    result.first_stage = convergence_of(fit.first_stage);

    if (inference.method == InferenceMethod::Gmm) {
        GmmInputs in;
        in.first_stage = &fit.first_stage_design;
        in.second_design = &fit.retained_design;
        in.first_residuals = fit.first_residuals;
        in.second_residuals = fit.second_stage.residuals;
        in.clusters = data.cluster_of_row();
        in.n_clusters = data.n_clusters();
        in.weights = weight_vector(data);
        const Eigen::MatrixXd full = gmm_vcov(in, inference.cluster_correction);
        const bool has_intercept = fit.second_stage.retained_columns.front() == 0;
        const Eigen::Index offset = has_intercept ? 1 : 0;
        const auto k = static_cast<Eigen::Index>(fit.terms.size());
        result.vcov = full.block(offset, offset, k, k);
    } else {
        const std::vector<Term> reference = fit.terms;
        EstimateFn estimate = [&](const PanelDataset& sample) {
            const TwoStageFit f = fit_two_stage(sample, first_stage, second_stage);
            Eigen::VectorXd v(static_cast<Eigen::Index>(reference.size()));
            for (std::size_t j = 0; j < reference.size(); ++j) {
                const auto it = std::find(f.terms.begin(), f.terms.end(), reference[j]);
                if (it == f.terms.end()) {
                    throw Error(ErrorCode::DegenerateDesign, "term " + reference[j].label() + " not estimable in replicate");
                }
                v[static_cast<Eigen::Index>(j)] = f.point[it - f.terms.begin()];
            }
            return v;
        };
        const BootstrapResult boot = bootstrap_vcov(data, estimate, inference);
        result.vcov = boot.vcov;
        result.n_bootstraps = boot.n_reps;
        result.n_failed_replicates = boot.n_failed;
        result.seed = inference.seed;
    }
    result.se = standard_errors(result.vcov);
    apply_horizon(result, second_stage);
    return result;
}

EstimateResult estimate_imputation(const PanelDataset& data, const FirstStageSpec& first_stage,
                                   const SecondStageSpec& second_stage) {
    FirstStageResult fs = run_first_stage(data, first_stage);
    const SecondStageDesign design = build_second_stage(data, second_stage);
    const auto w = data.weights();

    EstimateResult result;
    result.estimator = "imputation";
    result.kind = second_stage.kind;
    result.n_obs = data.n_rows();
    result.n_clusters = data.n_clusters();
    result.first_stage = convergence_of(fs.fit);

    std::vector<double> points;
    for (std::size_t j = 0; j < design.terms.size(); ++j) {
        const auto col = design.X.col(static_cast<Eigen::Index>(j + 1));
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            const double x = col[static_cast<Eigen::Index>(i)];
            if (x == 0.0) continue;
            num += w[i] * fs.adjusted[static_cast<Eigen::Index>(i)];
            den += w[i];
        }
        if (den > 0.0) {
            result.terms.push_back(design.terms[j]);
            points.push_back(num / den);
        }
    }
    result.point = Eigen::Map<const Eigen::VectorXd>(points.data(), static_cast<Eigen::Index>(points.size()));
    result.se = Eigen::VectorXd::Constant(result.point.size(), std::numeric_limits<double>::quiet_NaN());
    apply_horizon(result, second_stage);
    return result;
}

}  // namespace tsdid
