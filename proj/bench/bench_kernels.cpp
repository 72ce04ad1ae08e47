// Parallel conv kernels vs the serial reference, at the network's layer shapes.
// Thread count follows SEGLAB_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "seglab/kernels.hpp"
#include "seglab/rng.hpp"

using namespace seglab;

namespace {

struct Buffers {
    ConvGeometry g;
    std::vector<double> in, w, b, out, go, gi, gw, gb;

    explicit Buffers(ConvGeometry geom) : g(geom)
    {
        Rng rng(1);
        auto fill = [&](std::vector<double>& v, std::size_t n) {
            v.resize(n);
            for (double& x : v) {
                x = rng.normal();
            }
        };
        fill(in, g.input_size());
        fill(w, g.weight_size());
        fill(b, g.out_channels);
        fill(go, g.output_size());
        out.resize(g.output_size());
        gi.resize(g.input_size());
        gw.resize(g.weight_size());
        gb.resize(g.out_channels);
    }
};

ConvGeometry geometry(const benchmark::State& state)
{
    const int in = static_cast<int>(state.range(0));
    const int size = static_cast<int>(state.range(1));
    return ConvGeometry{in, 8, 3, size, size};
}

template <bool Parallel>
void BM_Forward(benchmark::State& state)
{
    Buffers buf(geometry(state));
    for (auto _ : state) {
        if constexpr (Parallel) {
            conv2d_forward(buf.g, buf.in, buf.w, buf.b, buf.out);
        } else {
            reference::conv2d_forward(buf.g, buf.in, buf.w, buf.b, buf.out);
        }
        benchmark::DoNotOptimize(buf.out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(buf.g.output_size()));
}

template <bool Parallel>
void BM_Backward(benchmark::State& state)
{
    Buffers buf(geometry(state));
    for (auto _ : state) {
        if constexpr (Parallel) {
            conv2d_backward_input(buf.g, buf.go, buf.w, buf.gi);
            conv2d_backward_params(buf.g, buf.go, buf.in, buf.gw, buf.gb);
        } else {
            reference::conv2d_backward_input(buf.g, buf.go, buf.w, buf.gi);
            reference::conv2d_backward_params(buf.g, buf.go, buf.in, buf.gw, buf.gb);
        }
        benchmark::DoNotOptimize(buf.gi.data());
        benchmark::DoNotOptimize(buf.gw.data());
    }
}

void shapes(benchmark::internal::Benchmark* b)
{
    b->Args({1, 64})->Args({8, 64})->Args({8, 128});
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Name("forward/reference")->Apply(shapes);
BENCHMARK(BM_Forward<true>)->Name("forward/parallel")->Apply(shapes);
BENCHMARK(BM_Backward<false>)->Name("backward/reference")->Apply(shapes);
BENCHMARK(BM_Backward<true>)->Name("backward/parallel")->Apply(shapes);

int main(int argc, char** argv)
{
    configure_threads();
    benchmark::Initialize(&argc, argv);
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
