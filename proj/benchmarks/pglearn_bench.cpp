#include <benchmark/benchmark.h>

#include "pglearn/objective.hpp"
#include "pglearn/optimizer.hpp"

using namespace pglearn;

namespace {

struct Task {
    Dataset data;
    SplitSpec split;
    HyperConfig config;
};

Task make_task(Index n) {
    Task t;
    t.data = inject_noise_features(make_blobs({n, 4, 4, 2.0}, 1), 1.0, 2);
    t.split = sample_split(t.data, 0.1, 0.5, 3);
    const SearchSpace space = make_search_space(t.data, 0);
    t.config = {10, Eigen::VectorXd::Constant(t.data.d(), 1.0 / (space.mean_distance * space.mean_distance))};
    return t;
}

void BM_BuildGraph(benchmark::State &state) {
    const Task t = make_task(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_knn_graph(t.data.features, t.config));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildGraph)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Complexity();

void BM_LgcSolve(benchmark::State &state) {
    const Task t = make_task(state.range(0));
    const Problem p(t.data, t.split);
    const SparseGraph g = build_knn_graph(t.data.features, t.config);
    for (auto _ : state) benchmark::DoNotOptimize(lgc_power_solve(g.normalized, p.label_matrix(), {}));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LgcSolve)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Complexity();

void BM_LossGradient(benchmark::State &state) {
    const Task t = make_task(state.range(0));
    const Problem p(t.data, t.split);
    const SparseGraph g = build_knn_graph(t.data.features, t.config);
    const Eigen::MatrixXd f = lgc_power_solve(g.normalized, p.label_matrix(), {}).F;
    for (auto _ : state)
        benchmark::DoNotOptimize(loss_gradient(t.data.features, g, f, t.split.validation, t.data.labels, {}));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LossGradient)->Arg(250)->Arg(500)->Arg(1000)->Arg(2000)->Complexity()->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
