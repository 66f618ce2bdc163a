#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

#include "etdp/closed_testing.hpp"
#include "etdp/distributions.hpp"
#include "etdp/eprocess.hpp"

namespace {

std::vector<double> random_evalues(int m, std::uint64_t seed) {
    std::mt19937_64 rng = etdp::substream_rng(seed, 7);
    std::vector<double> e(m);
    for (auto& v : e)
        v = std::exp(-3.0 + 8.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53);
    return e;
}

etdp::DiscoverySet front_set(int size) {
    etdp::DiscoverySet set;
    set.label = "bench";
    for (int i = 1; i <= size; ++i) set.indices.push_back(i);
    return set;
}

void bm_shortcut_bound(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const auto e = random_evalues(m, 11);
    const auto set = front_set(m / 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(etdp::shortcut_bound(e, set, 0.2).first);
}
BENCHMARK(bm_shortcut_bound)->Arg(30)->Arg(90)->Arg(300);

void bm_brute_force_bound(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const auto e = random_evalues(m, 11);
    const auto set = front_set(m / 2);
    for (auto _ : state)
        benchmark::DoNotOptimize(etdp::brute_force_bound(e, set, 0.2));
}
BENCHMARK(bm_brute_force_bound)->Arg(8)->Arg(12)->Arg(16);

void bm_update_gaussian(benchmark::State& state) {
    etdp::EProcessFamily family;
    family.kind = etdp::FamilyKind::gaussian_lr;
    family.delta = 0.5;
    const etdp::FamilyUpdater update(family);
    std::mt19937_64 rng = etdp::substream_rng(3, 0);
    etdp::ElementaryState s = etdp::init_eprocess(family);
    for (auto _ : state) {
        s = update(s, etdp::standard_normal(rng));
        benchmark::DoNotOptimize(s.log_e);
    }
}
BENCHMARK(bm_update_gaussian);

void bm_update_t_lr(benchmark::State& state) {
    etdp::EProcessFamily family;
    family.kind = etdp::FamilyKind::t_lr;
    family.delta = 0.5;
    const etdp::FamilyUpdater update(family);
    std::mt19937_64 rng = etdp::substream_rng(3, 1);
    etdp::ElementaryState s = etdp::init_eprocess(family);
    for (auto _ : state) {
        s = update(s, etdp::standard_normal(rng));
        benchmark::DoNotOptimize(s.log_e);
    }
}
BENCHMARK(bm_update_t_lr);

void bm_update_mom(benchmark::State& state) {
    etdp::EProcessFamily family;
    family.kind = etdp::FamilyKind::mom;
    family.delta_min = 0.5;
    family.quadrature_nodes = 64;
    const etdp::FamilyUpdater update(family);
    std::mt19937_64 rng = etdp::substream_rng(3, 2);
    etdp::ElementaryState s = etdp::init_eprocess(family);
    for (auto _ : state) {
        s = update(s, etdp::standard_normal(rng));
        benchmark::DoNotOptimize(s.log_e);
    }
}
BENCHMARK(bm_update_mom);

void bm_bound_series(benchmark::State& state) {
    const int m = 90;
    const int horizon = 100;
    etdp::EValueMatrix matrix = etdp::make_evalue_matrix(m, horizon);
    std::mt19937_64 rng = etdp::substream_rng(5, 0);
    for (int t = 1; t <= horizon; ++t)
        for (int j = 0; j < m; ++j)
            matrix.values[t][j] =
                std::exp(-3.0 + 8.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53);
    const auto set = front_set(30);
    for (auto _ : state)
        benchmark::DoNotOptimize(etdp::bound_series(matrix, set, 0.2, true).c_ard.back());
}
BENCHMARK(bm_bound_series);

} // namespace

BENCHMARK_MAIN();
