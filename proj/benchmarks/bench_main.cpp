#include <benchmark/benchmark.h>

#include <random>

#include "funs/funs_net.hpp"

namespace {

funs::SensorGraph grid_graph(int side) {
    std::vector<std::pair<int, int>> edges;
    const int n = side * side;
    for (int i = 0; i < n; ++i) {
        const int r = i / side, c = i % side;
        if (c + 1 < side) {
            edges.emplace_back(i, i + 1);
            edges.emplace_back(i + 1, i);
        }
        if (r + 1 < side) {
            edges.emplace_back(i, i + side);
            edges.emplace_back(i + side, i);
        }
    }
    return funs::SensorGraph::from_edges(n, std::move(edges), funs::Matrix::ones(n, 3));
}

void bench_mpnn_forward(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    auto graph = grid_graph(side);
    std::mt19937_64 rng(1);
    funs::ParamSet params;
    auto layer = funs::AttentionLayer::create(params, "bench", 16, 8, rng);
    funs::Matrix h = funs::uniform_init(graph.n, 16, 1.0, rng);
    for (auto _ : state) {
        funs::Tape tape;
        funs::ParamBinding bind(tape, params);
        benchmark::DoNotOptimize(layer.forward(tape, bind, tape.leaf(h), graph));
    }
}
BENCHMARK(bench_mpnn_forward)->Arg(8)->Arg(12)->Arg(16);

void bench_funs_net_window(benchmark::State& state) {
    const int side = 12;
    auto graph = grid_graph(side);
    std::mt19937_64 rng(2);
    funs::FunsNetConfig cfg;
    cfg.d = 2;
    cfg.z = 3;
    cfg.h = 8;
    funs::FunsNet model(cfg, 3);
    std::vector<funs::Matrix> window(static_cast<size_t>(state.range(0)),
                                     funs::uniform_init(graph.n, 2, 1.0, rng));
    std::vector<double> mask(graph.n, 1.0);
    for (auto _ : state) {
        funs::Tape tape;
        funs::ParamBinding bind(tape, model.params());
        std::mt19937_64 step_rng(7);
        auto ids = model.forward_sequence(tape, bind, window, mask, graph, true, step_rng);
        auto loss = tape.scale(tape.sum(ids.back()), 1e-3);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.adjoint(bind.id(0)));
    }
}
BENCHMARK(bench_funs_net_window)->Arg(8)->Arg(24);

}  // namespace

BENCHMARK_MAIN();
