#include "objsearch/harness.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace objsearch;

namespace {

OrderingProblem random_problem(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<std::pair<double, double>> pts(n + 1);
    for (auto& p : pts) p = {rng.uniform01() * 20.0, rng.uniform01() * 20.0};
    auto dist = [&](std::size_t a, std::size_t b) {
        return std::hypot(pts[a].first - pts[b].first, pts[a].second - pts[b].second);
    };
    OrderingProblem p;
    for (std::size_t i = 0; i < n; ++i) {
        p.ids.push_back("c" + std::to_string(i));
        p.start_cost.push_back(dist(0, i + 1));
        p.search_cost.push_back(0.0);
        p.p_success.push_back(rng.uniform01());
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p.pair_cost.push_back(dist(i + 1, j + 1));
    }
    return p;
}

void BM_SolveOrdering(benchmark::State& state)
{
    const OrderingProblem p = random_problem(static_cast<std::size_t>(state.range(0)), 7);
    for (auto _ : state) benchmark::DoNotOptimize(solve_ordering(p));
}
BENCHMARK(BM_SolveOrdering)->DenseRange(4, 12, 2);

void BM_GridAstar(benchmark::State& state)
{
    const MapInstance m = generate_map(3, {}, builtin_prior());
    const Cell far = m.containers.back().access_cell;
    for (auto _ : state) benchmark::DoNotOptimize(grid_astar(m.grid, m.start_pose, far));
}
BENCHMARK(BM_GridAstar);

void BM_DistanceMatrix(benchmark::State& state)
{
    const MapInstance m = generate_map(3, {}, builtin_prior());
    std::vector<Cell> pts{m.start_pose};
    for (const Container& c : m.containers) pts.push_back(c.access_cell);
    for (auto _ : state) benchmark::DoNotOptimize(distance_matrix(m.grid, pts));
    state.counters["points"] = static_cast<double>(pts.size());
}
BENCHMARK(BM_DistanceMatrix);

void BM_GenerateMap(benchmark::State& state)
{
    std::uint64_t seed = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generate_map(seed++, {}, builtin_prior()));
}
BENCHMARK(BM_GenerateMap);

void BM_ModelBasedTrial(benchmark::State& state)
{
    const MapInstance m = generate_map(5, {}, builtin_prior());
    const auto world = KnownWorld::from_map(m);
    const std::string target = sample_task(m, 5);
    PriorProvider provider(builtin_prior());
    ModelBasedPolicy policy(provider);
    for (auto _ : state) benchmark::DoNotOptimize(run_search(world, m, target, policy));
}
BENCHMARK(BM_ModelBasedTrial);

} // namespace

BENCHMARK_MAIN();
