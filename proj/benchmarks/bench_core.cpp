#include <benchmark/benchmark.h>

#include "equss/datagen.hpp"
#include "equss/evaluation.hpp"
#include "equss/expansion.hpp"
#include "equss/quantizer.hpp"
#include "equss/rng.hpp"

namespace {

using namespace equss;

Codebooks make_books(std::size_t m, std::size_t k, std::size_t d_e) {
    return init_codebooks({m, k, d_e}, 1);
}

std::vector<double> make_vector(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(dim);
    for (double& v : x) v = rng.uniform(-1, 1);
    return x;
}

void BM_Assign(benchmark::State& state) {
    std::size_t k = static_cast<std::size_t>(state.range(0));
    std::size_t dim = 16;
    auto books = make_books(1, k, dim);
    auto x = make_vector(dim, 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(assign(x, books.entries.data(), k, dim));
}
BENCHMARK(BM_Assign)->Arg(16)->Arg(64)->Arg(256);

void BM_Quantize(benchmark::State& state) {
    std::size_t m = static_cast<std::size_t>(state.range(0));
    auto books = make_books(m, 256, 1024);
    auto x = make_vector(1024, 3);
    for (auto _ : state) benchmark::DoNotOptimize(quantize(x, books));
}
BENCHMARK(BM_Quantize)->Arg(8)->Arg(32)->Arg(64);

void BM_HeadForward(benchmark::State& state) {
    auto head = init_head(384, 1024, 4);
    auto f = make_vector(384, 5);
    for (auto _ : state) benchmark::DoNotOptimize(forward(head, f));
}
BENCHMARK(BM_HeadForward);

void BM_HeadBackward(benchmark::State& state) {
    auto head = init_head(384, 1024, 4);
    auto f = make_vector(384, 5);
    auto grad = make_vector(1024, 6);
    ForwardTrace trace;
    forward(head, f, &trace);
    for (auto _ : state) benchmark::DoNotOptimize(backward(head, trace, grad));
}
BENCHMARK(BM_HeadBackward);

void BM_KMeans(benchmark::State& state) {
    MixtureSpec spec = diversity_ladder(4, 16, 0.1, 2.0, 7, 250, 3.0);
    FeatureBatch batch = generate(spec);
    for (auto _ : state) benchmark::DoNotOptimize(kmeans(batch, 4, 50, 0));
}
BENCHMARK(BM_KMeans);

}  // namespace

BENCHMARK_MAIN();
