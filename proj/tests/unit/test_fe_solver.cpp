#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tsdid/estimator.hpp"
#include "tsdid/fe_solver.hpp"

using namespace tsdid;
using testing::code_of;

namespace {

Eigen::VectorXd outcomes(const PanelDataset& d) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(d.n_rows()));
    for (std::size_t i = 0; i < d.n_rows(); ++i) y[static_cast<Eigen::Index>(i)] = d.row(i).outcome;
    return y;
}

Eigen::VectorXd ones(const PanelDataset& d) { return Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.n_rows())); }

FirstStageSpec with_covariates(const PanelDataset& d) {
    FirstStageSpec s;
    s.covariates = d.covariate_names();
    return s;
}

}  // namespace

TEST_CASE("exact two-way data is fitted without residual") {
    const PanelDataset d = testing::panel({{"a", 1, 1.0, {}}, {"a", 2, 2.0, {}}, {"a", 3, 4.0, {}},
                                           {"b", 1, 3.0, {}}, {"b", 2, 4.0, {}}, {"b", 3, 6.0, {}},
                                           {"c", 1, -1.0, {}}, {"c", 3, 2.0, {}}});
    const FeSpec spec = build_fe_spec(d, {});
    const FirstStageFit fit = fit_fixed_effects(outcomes(d), spec, ones(d), FeOptions{1e-12, 1000});
    CHECK(fit.converged);
    const Eigen::VectorXd pred = predict(fit, spec);
    CHECK((pred - outcomes(d)).cwiseAbs().maxCoeff() < 1e-10);
    // Dimension 1 pins its first observed level.
    CHECK(fit.level_effects[1][fit.pinned_level[1]] == 0.0);
    CHECK(fit.level_effects[0][1] - fit.level_effects[0][0] == doctest::Approx(2.0));
}

TEST_CASE("fitted values match dense least squares on random unbalanced panels") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 25; ++rep) {
        const PanelDataset d = oracle::random_panel(rng, {.random_weights = rep % 2 == 1});
        const FeSpec spec = build_fe_spec(d, with_covariates(d));
        Eigen::VectorXd w(static_cast<Eigen::Index>(d.n_rows()));
        for (std::size_t i = 0; i < d.n_rows(); ++i) w[static_cast<Eigen::Index>(i)] = d.weights()[i];
        const FirstStageFit fit = fit_fixed_effects(outcomes(d), spec, w, FeOptions{1e-13, 100000});
        REQUIRE(fit.converged);
        const Eigen::MatrixXd X = oracle::first_stage_matrix(d);
        const Eigen::VectorXd s = w.cwiseSqrt();
        const Eigen::VectorXd gamma = (s.asDiagonal() * X).colPivHouseholderQr().solve(s.cwiseProduct(outcomes(d)));
        const Eigen::VectorXd dense = X * gamma;
        CHECK((predict(fit, spec) - dense).cwiseAbs().maxCoeff() < 1e-8);
        for (Eigen::Index j = 0; j < fit.covariate_coefs.size(); ++j) {
            CHECK(fit.covariate_coefs[j] == doctest::Approx(gamma[X.cols() - fit.covariate_coefs.size() + j]).epsilon(1e-8));
        }
    }
}

TEST_CASE("residual sum of squares never increases across sweeps") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const PanelDataset d = oracle::random_panel(rng, {.max_covariates = 0, .random_weights = true});
        const FeSpec spec = build_fe_spec(d, {});
        const auto w = d.weights();
        const FirstStageFit fit = fit_fixed_effects(
            outcomes(d), spec, Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())),
            FeOptions{1e-12, 5000});
        for (std::size_t s = 1; s < fit.rss_trace.size(); ++s) {
            CHECK(fit.rss_trace[s] <= fit.rss_trace[s - 1] * (1.0 + 1e-12) + 1e-14);
        }
    }
}

TEST_CASE("sweep limit reports non-convergence without throwing") {
    std::mt19937_64 rng(2);
    const PanelDataset d = oracle::random_panel(rng, {.min_units = 10, .min_periods = 6, .max_covariates = 0});
    const FeSpec spec = build_fe_spec(d, {});
    const FirstStageFit fit = fit_fixed_effects(outcomes(d), spec, ones(d), FeOptions{1e-15, 1});
    CHECK(fit.iterations == 1);
    CHECK_FALSE(fit.converged);
}

TEST_CASE("levels outside the fitting sample cannot be predicted") {
    const PanelDataset d = testing::panel({{"a", 1, 1, {}}, {"a", 2, 2, {}}, {"b", 1, 3, 1}, {"b", 2, 4, 1}});
    const FeSpec spec = build_fe_spec(d, {}, untreated_mask(d));
    const FirstStageFit fit = fit_fixed_effects(outcomes(d), spec, ones(d));
    CHECK_FALSE(fit.level_observed[0][1]);
    CHECK(std::isnan(fit.level_effects[0][1]));
    CHECK(code_of([&] { (void)predict(fit, spec); }) == ErrorCode::UnseenLevel);
}

TEST_CASE("disconnected samples cannot be compared across components") {
    // Units a/b only share period 1..2, units c/d only 3..4: two components.
    const PanelDataset d = testing::panel({{"a", 1, 1, {}}, {"a", 2, 2, {}}, {"b", 1, 3, {}}, {"b", 2, 1, {}},
                                           {"c", 3, 1, {}}, {"c", 4, 2, {}}, {"d", 3, 5, {}}, {"d", 4, 1, {}}});
    std::vector<char> mask(d.n_rows(), 1);
    const FeSpec fit_spec = build_fe_spec(d, {}, mask);
    const FirstStageFit fit = fit_fixed_effects(outcomes(d), fit_spec, ones(d), FeOptions{1e-12, 1000});
    CHECK(fit.level_component[0][0] == fit.level_component[0][1]);
    CHECK(fit.level_component[0][0] != fit.level_component[0][2]);
    CHECK_NOTHROW((void)predict(fit, fit_spec));

    // A row pairing unit a with period 3 is not identified.
    FeSpec cross = fit_spec;
    for (auto& dim : cross.dimensions) dim.level_of_row.push_back(0);
    cross.dimensions[1].level_of_row.back() = 2;
    cross.sample_mask.push_back(0);
    cross.covariates.resize(cross.covariates.rows() + 1, 0);
    CHECK(code_of([&] { (void)predict(fit, cross); }) == ErrorCode::UnseenLevel);
}

TEST_CASE("covariate collinear with the fixed effects is rejected") {
    auto c = testing::columns({{"a", 1, 1, {}}, {"a", 2, 2, {}}, {"b", 1, 3, {}}, {"b", 2, 5, {}}});
    c.covariate_names = {"x"};
    c.covariates = {{1.0, 1.0, 2.0, 2.0}};
    const PanelDataset d = PanelDataset::from_columns(c);
    const FeSpec spec = build_fe_spec(d, with_covariates(d));
    CHECK(code_of([&] { (void)fit_fixed_effects(outcomes(d), spec, ones(d)); }) == ErrorCode::SingularCovariates);

    c.covariate_names = {"x", "z"};
    c.covariates = {{1.0, 0.0, 2.0, 5.0}, {2.0, 0.0, 4.0, 10.0}};
    const PanelDataset d2 = PanelDataset::from_columns(c);
    const FeSpec spec2 = build_fe_spec(d2, with_covariates(d2));
    CHECK(code_of([&] { (void)fit_fixed_effects(outcomes(d2), spec2, ones(d2)); }) == ErrorCode::SingularCovariates);
}

TEST_CASE("empty fitting sample") {
    const PanelDataset d = testing::hand_2x3();
    const FeSpec spec = build_fe_spec(d, {}, std::vector<char>(d.n_rows(), 0));
    CHECK(code_of([&] { (void)fit_fixed_effects(outcomes(d), spec, ones(d)); }) == ErrorCode::NoRowsSelected);
    CHECK(code_of([&] { (void)fit_fixed_effects(outcomes(d), build_fe_spec(d, {}), ones(d), FeOptions{0.0, 10}); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("demeaned columns are orthogonal to every dummy") {
    std::mt19937_64 rng(9);
    const PanelDataset d = oracle::random_panel(rng, {.min_units = 6, .max_covariates = 0});
    const FeSpec spec = build_fe_spec(d, {});
    Eigen::MatrixXd cols(static_cast<Eigen::Index>(d.n_rows()), 2);
    cols.col(0) = outcomes(d);
    cols.col(1) = Eigen::VectorXd::Random(cols.rows());
    const DemeanResult dm = demean(cols, spec.dimensions, {}, ones(d), FeOptions{1e-13, 100000});
    REQUIRE(dm.converged);
    const Eigen::MatrixXd Z = oracle::first_stage_matrix(d);
    CHECK((Z.transpose() * dm.residuals).cwiseAbs().maxCoeff() < 1e-9);
    // Unit dummies sum to the intercept, so residuals are centred too.
    CHECK(std::abs(dm.residuals.col(0).sum()) < 1e-9);
}

TEST_CASE("group fixed effects") {
    const PanelDataset d = testing::hand_2x3();
    FirstStageSpec fs;
    fs.effects = FixedEffectsKind::Group;
    const FeSpec spec = build_fe_spec(d, fs);
    REQUIRE(spec.dimensions.size() == 2);
    CHECK(spec.dimensions[0].n_levels == 2);
    CHECK(spec.dimensions[0].level_labels == std::vector<std::string>{"inf", "3"});
    CHECK(code_of([&] {
              FirstStageSpec bad;
              bad.covariates = {"missing"};
              (void)build_fe_spec(d, bad);
          }) == ErrorCode::MissingColumn);
}
