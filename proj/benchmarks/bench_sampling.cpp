#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "promobn/dist.hpp"
#include "promobn/inference.hpp"
#include "promobn/parser.hpp"
#include "promobn/rng.hpp"

using namespace promobn;

namespace {

const Network& fig2() {
    static const Network net = load_network(std::string(PROMOBN_DATA_DIR) + "/fig2.bnet");
    return net;
}

void BM_ForwardSample(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto workers = static_cast<unsigned>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_sample(fig2(), n, 42, {}, workers));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardSample)
    ->ArgsProduct({{10000, 100000}, {1, 4}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

void BM_ClampedMeanCI(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(equation_mean_ci(forward_sample(fig2(), 10000, 42, {{"Promotions", "Catalogue"}})));
    }
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_ClampedMeanCI)->Unit(benchmark::kMillisecond);

void BM_SampleTerm(benchmark::State& state) {
    const std::vector<DistTerm> terms = {DistTerm::triangular(9.6, 12, 24, 0.25), DistTerm::lognormal(3.1, 0.5242)};
    const DistTerm& term = terms.at(static_cast<std::size_t>(state.range(0)));
    RandomStream rng(42);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample(term, rng));
    }
    state.SetLabel(to_string(term));
}
BENCHMARK(BM_SampleTerm)->DenseRange(0, 1);

void BM_RemoveOutliers(benchmark::State& state) {
    RandomStream rng(7);
    std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
    for (double& x : xs) {
        x = sample(DistTerm::lognormal(4.5, 0.5), rng);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(remove_outliers(xs));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RemoveOutliers)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

}  // namespace
