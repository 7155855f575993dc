#include <benchmark/benchmark.h>

#include "tsdid/dgp.hpp"
#include "tsdid/estimator.hpp"

namespace {

tsdid::SimulatedPanel panel_of(int units, int periods) {
    tsdid::DgpConfig c;
    c.n_units = units;
    c.end = 2020;
    c.start = 2021 - periods;
    return tsdid::simulate(c);
}

void BM_FirstStageFit(benchmark::State& state) {
    const auto sim = panel_of(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const tsdid::FeSpec spec = tsdid::build_fe_spec(sim.data, {}, tsdid::untreated_mask(sim.data));
    Eigen::VectorXd y(static_cast<Eigen::Index>(sim.data.n_rows()));
    for (std::size_t i = 0; i < sim.data.n_rows(); ++i) y[static_cast<Eigen::Index>(i)] = sim.data.row(i).outcome;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(y.size());
    int sweeps = 0;
    for (auto _ : state) {
        const auto fit = tsdid::fit_fixed_effects(y, spec, w, {});
        sweeps = fit.iterations;
        benchmark::DoNotOptimize(fit.level_effects.data());
    }
    state.counters["rows"] = static_cast<double>(sim.data.n_rows());
    state.counters["sweeps"] = sweeps;
}
BENCHMARK(BM_FirstStageFit)->Args({1000, 31})->Args({5000, 31})->Args({10000, 100})->Unit(benchmark::kMillisecond);

void BM_TwfeDemean(benchmark::State& state) {
    const auto sim = panel_of(static_cast<int>(state.range(0)), 31);
    for (auto _ : state) {
        benchmark::DoNotOptimize(tsdid::estimate_twfe_naive(sim.data, tsdid::SecondStageSpec::static_effect()));
    }
}
BENCHMARK(BM_TwfeDemean)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace
