#include <doctest.h>

#include "helpers.hpp"
#include "tsdid/dgp.hpp"
#include "tsdid/estimator.hpp"
#include "tsdid/inference.hpp"

using namespace tsdid;
using testing::code_of;

namespace {

EstimateFn static_two_stage() {
    return [](const PanelDataset& d) { return fit_two_stage(d, {}, SecondStageSpec::static_effect()).point; };
}

SimulatedPanel small_panel(double noise, double slope = 0.3) {
    DgpConfig c;
    c.n_units = 60;
    c.start = 1;
    c.end = 8;
    c.groups = {{3, 0.4, 1.0, slope, 1.0}, {6, 0.3, 2.0, 0.0, 0.0}, {std::nullopt, 0.3, 0.0, 0.0, 0.5}};
    c.noise_sd = noise;
    c.seed = 77;
    return simulate(c);
}

}  // namespace

TEST_CASE("resampled clusters become distinct units and clusters") {
    const PanelDataset d = testing::hand_2x3();
    const std::vector<int> draws{1, 1};
    const PanelDataset b = resample_clusters(d, draws);
    CHECK(b.n_rows() == 6);
    CHECK(b.n_units() == 2);
    CHECK(b.n_clusters() == 2);
    CHECK(b.n_treated() == 2);
    CHECK(b.unit_label(0) == "0:2");
    CHECK(b.unit_label(1) == "1:2");

    auto c = testing::columns({{"a", 1, 1, {}}, {"a", 2, 1, {}}});
    c.cluster = {"x", "y"};
    const PanelDataset crossed = PanelDataset::from_columns(c);
    CHECK(code_of([&] { (void)resample_clusters(crossed, std::vector<int>{0}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("constant estimator across resamples has zero variance") {
    DgpConfig c;
    c.n_units = 40;
    c.start = 1;
    c.end = 6;
    c.groups = {{3, 0.5, 1.5, 0.0, 0.0}, {std::nullopt, 0.5, 0.0, 0.0, 0.0}};
    c.noise_sd = 0.0;
    const SimulatedPanel sim = simulate(c);
    InferenceSpec spec;
    spec.method = InferenceMethod::Bootstrap;
    spec.n_bootstraps = 20;
    const BootstrapResult r = bootstrap_vcov(sim.data, static_two_stage(), spec);
    CHECK(r.vcov(0, 0) <= 1e-12);
    CHECK(r.n_failed == 0);
}

TEST_CASE("same seed gives identical matrices; thread count does not matter") {
    const SimulatedPanel sim = small_panel(1.0);
    InferenceSpec spec;
    spec.method = InferenceMethod::Bootstrap;
    spec.n_bootstraps = 40;
    spec.seed = 123;
    spec.threads = 1;
    const BootstrapResult a = bootstrap_vcov(sim.data, static_two_stage(), spec);
    const BootstrapResult b = bootstrap_vcov(sim.data, static_two_stage(), spec);
    spec.threads = 4;
    const BootstrapResult c = bootstrap_vcov(sim.data, static_two_stage(), spec);
    CHECK(a.vcov == b.vcov);
    CHECK(a.vcov == c.vcov);
    spec.seed = 124;
    CHECK(bootstrap_vcov(sim.data, static_two_stage(), spec).vcov != a.vcov);
}

TEST_CASE("failed replicates are counted and bounded") {
    const SimulatedPanel sim = small_panel(1.0);
    InferenceSpec spec;
    spec.method = InferenceMethod::Bootstrap;
    spec.n_bootstraps = 50;
    int calls = 0;
    // Every fifth replicate fails: exactly 20% is still accepted.
    EstimateFn flaky = [&](const PanelDataset& d) -> Eigen::VectorXd {
        const bool replicate = d.unit_label(0).rfind("0:", 0) == 0;
        if (replicate && ++calls % 5 == 0) throw Error(ErrorCode::NoTreatedObservations, "synthetic");
        return fit_two_stage(d, {}, SecondStageSpec::static_effect()).point;
    };
    spec.threads = 1;
    const BootstrapResult r = bootstrap_vcov(sim.data, flaky, spec);
    CHECK(r.n_failed == 10);

    EstimateFn always = [&](const PanelDataset& d) -> Eigen::VectorXd {
        if (d.unit_label(0).rfind("0:", 0) == 0) throw Error(ErrorCode::NoTreatedObservations, "synthetic");
        return Eigen::VectorXd::Zero(1);
    };
    CHECK(code_of([&] { (void)bootstrap_vcov(sim.data, always, spec); }) == ErrorCode::TooManyFailedReplicates);

    spec.n_bootstraps = 1;
    CHECK(code_of([&] { (void)bootstrap_vcov(sim.data, static_two_stage(), spec); }) == ErrorCode::InvalidArgument);
}
