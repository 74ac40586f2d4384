#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>
#include <string>

#include "promobn/parser.hpp"

using namespace promobn;

namespace {

const std::string& fig2_text() {
    static const std::string text = [] {
        std::ifstream in(std::string(PROMOBN_DATA_DIR) + "/fig2.bnet");
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }();
    return text;
}

void BM_Tokenize(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(tokenize(fig2_text()));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(fig2_text().size()));
}
BENCHMARK(BM_Tokenize);

void BM_ParseNetwork(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_network(fig2_text()));
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(fig2_text().size()));
}
BENCHMARK(BM_ParseNetwork);

void BM_SerializeRoundTrip(benchmark::State& state) {
    const Network net = parse_network(fig2_text());
    for (auto _ : state) {
        benchmark::DoNotOptimize(parse_network(serialize_network(net)));
    }
}
BENCHMARK(BM_SerializeRoundTrip);

}  // namespace
