#include <benchmark/benchmark.h>

#include "tsdid/dgp.hpp"
#include "tsdid/estimator.hpp"

namespace {

tsdid::PanelDataset panel_of(int units, int periods) {
    tsdid::DgpConfig c;
    c.n_units = units;
    c.end = 2020;
    c.start = 2021 - periods;
    return tsdid::simulate(c).data;
}

void BM_TwoStageStaticGmm(benchmark::State& state) {
    const auto data = panel_of(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(tsdid::estimate_two_stage(data, {}, tsdid::SecondStageSpec::static_effect()));
    }
    state.counters["rows"] = static_cast<double>(data.n_rows());
}
BENCHMARK(BM_TwoStageStaticGmm)->Args({5000, 31})->Args({10000, 100})->Unit(benchmark::kMillisecond);

void BM_TwoStageEventStudyGmm(benchmark::State& state) {
    const auto data = panel_of(static_cast<int>(state.range(0)), 31);
    for (auto _ : state) {
        benchmark::DoNotOptimize(tsdid::estimate_two_stage(data, {}, tsdid::SecondStageSpec::event_study()));
    }
}
BENCHMARK(BM_TwoStageEventStudyGmm)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_TwfeWeights(benchmark::State& state) {
    const auto data = panel_of(static_cast<int>(state.range(0)), 31);
    for (auto _ : state) benchmark::DoNotOptimize(tsdid::compute_twfe_weights(data));
}
BENCHMARK(BM_TwfeWeights)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace
