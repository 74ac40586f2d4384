#include <benchmark/benchmark.h>

#include <string>

#include "promobn/inference.hpp"
#include "promobn/parser.hpp"

using namespace promobn;

namespace {

const Network& fig2() {
    static const Network net = load_network(std::string(PROMOBN_DATA_DIR) + "/fig2.bnet");
    return net;
}

void BM_ExactDiscretePosterior(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(discrete_posterior_exact(fig2(), {{"Price", "DiscountedInstore"}}));
    }
}
BENCHMARK(BM_ExactDiscretePosterior);

// Grid step in hundredths of a unit.
void BM_ConvolutionPosterior(benchmark::State& state) {
    PosteriorOptions options;
    options.grid_step = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            posterior_given_equation_evidence(fig2(), 175.0, PosteriorMethod::ConvolutionDensity, options));
    }
    state.SetLabel("step " + std::to_string(options.grid_step));
}
BENCHMARK(BM_ConvolutionPosterior)->Arg(100)->Arg(50)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_KdePosterior(benchmark::State& state) {
    PosteriorOptions options;
    options.kde_samples = static_cast<std::size_t>(state.range(0));
    options.workers = 4;
    for (auto _ : state) {
        benchmark::DoNotOptimize(posterior_given_equation_evidence(fig2(), 175.0, PosteriorMethod::MonteCarloKde, options));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KdePosterior)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_AnalyticMean(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(analytic_mean(fig2()));
    }
}
BENCHMARK(BM_AnalyticMean);

}  // namespace
