#include <benchmark/benchmark.h>

#include "tsdid/dgp.hpp"
#include "tsdid/estimator.hpp"

namespace {

void BM_ClusterBootstrap(benchmark::State& state) {
    tsdid::DgpConfig c;
    c.n_units = 500;
    const auto data = tsdid::simulate(c).data;
    tsdid::InferenceSpec spec;
    spec.method = tsdid::InferenceMethod::Bootstrap;
    spec.n_bootstraps = 50;
    spec.seed = 1;
    spec.threads = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(tsdid::estimate_two_stage(data, {}, tsdid::SecondStageSpec::static_effect(), spec));
    }
    state.counters["reps"] = spec.n_bootstraps;
}
BENCHMARK(BM_ClusterBootstrap)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ResampleClusters(benchmark::State& state) {
    tsdid::DgpConfig c;
    c.n_units = 5000;
    const auto data = tsdid::simulate(c).data;
    std::vector<int> draws(data.n_clusters());
    for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = static_cast<int>((i * 7919) % draws.size());
    for (auto _ : state) benchmark::DoNotOptimize(tsdid::resample_clusters(data, draws));
}
BENCHMARK(BM_ResampleClusters)->Unit(benchmark::kMillisecond);

}  // namespace
