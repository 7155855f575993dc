#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tsdid/dgp.hpp"
#include "tsdid/estimator.hpp"

using namespace tsdid;
using testing::code_of;
using testing::rel_err;

namespace {

DgpConfig noise_free(std::vector<GroupConfig> groups, int units = 30) {
    DgpConfig c;
    c.n_units = units;
    c.start = 1;
    c.end = 10;
    c.groups = std::move(groups);
    c.noise_sd = 0.0;
    c.seed = 5;
    return c;
}

}  // namespace

TEST_CASE("staggered 2x3: negative weight turns positive effects into zero") {
    const PanelDataset d = testing::staggered_2x3(1.0, 3.0, 1.0);
    const EstimateResult r = estimate_twfe_naive(d, SecondStageSpec::static_effect());
    CHECK(std::abs(r.point[0]) < 1e-10);
    CHECK(r.estimator == "twfe");

    const WeightDecomposition w = compute_twfe_weights(d);
    REQUIRE(w.cells.size() == 3);
    CHECK(w.cells[0].group == 2);
    CHECK(w.cells[0].period == 2);
    CHECK(w.cells[0].weight == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w.cells[1].weight == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(w.cells[2].group == 3);
    CHECK(w.cells[2].weight == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.n_negative == 1);
    CHECK(w.sum_weights == doctest::Approx(1.0).epsilon(1e-12));

    const auto dense = oracle::fwl_weights(d);
    for (const auto& c : w.cells) CHECK(std::abs(c.weight - dense.at({c.group, c.period})) < 1e-10);
}

TEST_CASE("constant effect under staggered timing is unbiased") {
    const SimulatedPanel sim = simulate(noise_free({{3, 0.3, 2.0, 0.0, 1.0}, {6, 0.3, 2.0, 0.0, 0.0}, {8, 0.4, 2.0, 0.0, 0.5}}));
    CHECK(rel_err(estimate_twfe_naive(sim.data, SecondStageSpec::static_effect()).point[0], 2.0) < 1e-8);
}

TEST_CASE("simultaneous adoption averages the cell effects") {
    const SimulatedPanel sim = simulate(noise_free({{6, 0.5, 1.0, 0.7, 1.0}, {std::nullopt, 0.5, 0.0, 0.0, 0.0}}));
    double mean = 0.0;
    for (const auto& [cell, tau] : sim.truth.tau_gt) mean += tau;
    mean /= static_cast<double>(sim.truth.tau_gt.size());
    CHECK(rel_err(estimate_twfe_naive(sim.data, SecondStageSpec::static_effect()).point[0], mean) < 1e-8);

    const WeightDecomposition w = compute_twfe_weights(sim.data);
    for (const auto& c : w.cells) CHECK(c.weight == doctest::Approx(1.0 / static_cast<double>(w.cells.size())).epsilon(1e-10));
    CHECK(w.n_negative == 0);
}

TEST_CASE("static estimate equals the weighted sum of cell effects") {
    const SimulatedPanel sim = simulate(noise_free({{3, 0.25, 1.0, 0.3, 1.0}, {7, 0.5, 2.5, 0.1, 0.0}, {std::nullopt, 0.25, 0, 0, 0}}, 40));
    const WeightDecomposition w = compute_twfe_weights(sim.data);
    double implied = 0.0;
    for (const auto& c : w.cells) implied += c.weight * sim.truth.tau_gt.at({c.group, c.period});
    CHECK(rel_err(estimate_twfe_naive(sim.data, SecondStageSpec::static_effect()).point[0], implied) < 1e-8);
}

TEST_CASE("matches dense dummy-variable regression") {
    std::mt19937_64 rng(71);
    for (int rep = 0; rep < 20; ++rep) {
        const PanelDataset d = oracle::random_panel(rng, {.max_covariates = 0, .random_weights = rep % 2 == 1, .random_clusters = true});
        if (d.n_treated() == 0) continue;
        const EstimateResult r = estimate_twfe_naive(d, SecondStageSpec::static_effect());
        CHECK(rel_err(r.point[0], oracle::twfe_static(d)) < 1e-8);

        // CR0 sandwich on the residualized indicator.
        const Eigen::MatrixXd Z = oracle::first_stage_matrix(d);
        Eigen::VectorXd w(static_cast<Eigen::Index>(d.n_rows())), y(w.size()), D(w.size());
        for (std::size_t i = 0; i < d.n_rows(); ++i) {
            w[static_cast<Eigen::Index>(i)] = d.weights()[i];
            y[static_cast<Eigen::Index>(i)] = d.row(i).outcome;
            D[static_cast<Eigen::Index>(i)] = d.row(i).treated ? 1.0 : 0.0;
        }
        Eigen::MatrixXd X(Z.rows(), Z.cols() + 1);
        X << D, Z;
        const Eigen::VectorXd s = w.cwiseSqrt();
        const Eigen::VectorXd beta = (s.asDiagonal() * X).colPivHouseholderQr().solve(s.cwiseProduct(y));
        const Eigen::VectorXd e = y - X * beta;
        const Eigen::VectorXd Dt = D - Z * (s.asDiagonal() * Z).colPivHouseholderQr().solve(s.cwiseProduct(D));
        const double bread = 1.0 / Dt.dot(w.cwiseProduct(Dt));
        std::vector<double> score(d.n_clusters(), 0.0);
        for (std::size_t i = 0; i < d.n_rows(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            score[static_cast<std::size_t>(d.cluster_of_row()[i])] += w[ii] * Dt[ii] * e[ii];
        }
        double meat = 0.0;
        for (double v : score) meat += v * v;
        CHECK(rel_err(r.vcov(0, 0), bread * meat * bread) < 1e-7);
    }
}

TEST_CASE("event-study TWFE matches dense dummy-variable regression") {
    std::mt19937_64 rng(72);
    for (int rep = 0; rep < 10; ++rep) {
        const PanelDataset d = oracle::random_panel(rng, {.min_units = 6, .max_covariates = 0});
        if (d.n_treated() == 0) continue;
        const EstimateResult r = estimate_twfe_naive(d, SecondStageSpec::event_study());
        const oracle::DenseDesign es = oracle::event_design(d, {RelTime::at(-1), RelTime::never()});
        const Eigen::MatrixXd Z = oracle::first_stage_matrix(d);
        Eigen::MatrixXd X(Z.rows(), es.X.cols() - 1 + Z.cols());
        X << es.X.rightCols(es.X.cols() - 1), Z;
        Eigen::VectorXd y(Z.rows());
        for (std::size_t i = 0; i < d.n_rows(); ++i) y[static_cast<Eigen::Index>(i)] = d.row(i).outcome;
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
        if (qr.rank() < X.cols()) continue;  // an event time is absorbed; covered elsewhere
        const Eigen::VectorXd beta = qr.solve(y);
        REQUIRE(r.terms.size() == es.labels.size());
        for (std::size_t j = 0; j < es.labels.size(); ++j) {
            CHECK(r.terms[j].label() == es.labels[j]);
            CHECK(rel_err(r.point[static_cast<Eigen::Index>(j)], beta[static_cast<Eigen::Index>(j)]) < 1e-7);
        }
    }
}

TEST_CASE("TWFE and weight errors") {
    const PanelDataset never = testing::panel({{"a", 1, 1, {}}, {"a", 2, 2, {}}});
    CHECK(code_of([&] { (void)estimate_twfe_naive(never, {}); }) == ErrorCode::NoTreatedObservations);
    CHECK(code_of([&] { (void)compute_twfe_weights(never); }) == ErrorCode::NoTreatedObservations);
    // Unit b is treated in all its rows: D equals b's dummy.
    const PanelDataset absorbed = testing::panel({{"a", 1, 1, {}}, {"a", 2, 2, {}}, {"b", 1, 5, 1}, {"b", 2, 7, 1}});
    CHECK(code_of([&] { (void)compute_twfe_weights(absorbed); }) == ErrorCode::DegenerateDesign);
    CHECK(code_of([&] { (void)estimate_twfe_naive(absorbed, {}); }) == ErrorCode::DegenerateDesign);
}

TEST_CASE("weights sum to one on unbalanced weighted panels") {
    std::mt19937_64 rng(73);
    for (int rep = 0; rep < 30; ++rep) {
        const PanelDataset d = oracle::random_panel(rng, {.max_covariates = 0, .random_weights = true});
        if (d.n_treated() == 0) continue;
        const WeightDecomposition w = compute_twfe_weights(d);
        CHECK(std::abs(w.sum_weights - 1.0) < 1e-10);
        const auto dense = oracle::fwl_weights(d);
        for (const auto& c : w.cells) CHECK(std::abs(c.weight - dense.at({c.group, c.period})) < 1e-9);
    }
}
