// Reference (serial) vs parallel kernels on training-sized tensors.

#include "afrda/gaussian.hpp"
#include "afrda/kernels.hpp"
#include "afrda/random.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace afrda;

Tensor filled(Shape shape, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    Tensor t(std::move(shape));
    for (double& v : t.data())
        v = uniform(rng, -1.0, 1.0);
    return t;
}

// Batch 2, 16 channels at 32x32: one HR feature level of a training step.
struct Inputs {
    Tensor x = filled({2, 16, 32, 32}, 1);
    Tensor w3 = filled({16, 16, 3, 3}, 2);
    Tensor w1 = filled({16, 16}, 3);
    Tensor bias = filled({16}, 4);
    Tensor grad = filled({2, 16, 32, 32}, 5);
    GaussianKernel kernel{1.0, 5};
};

const Inputs& inputs()
{
    static const Inputs in;
    return in;
}

template <bool Parallel>
void conv3x3_fwd(benchmark::State& state)
{
    const Inputs& in = inputs();
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kernels::conv3x3_forward(in.x, in.w3, in.bias)
                                          : kernels::reference::conv3x3_forward(in.x, in.w3, in.bias));
}

template <bool Parallel>
void conv3x3_bwd(benchmark::State& state)
{
    const Inputs& in = inputs();
    for (auto _ : state) {
        Tensor gx(in.x.shape()), gw(in.w3.shape()), gb(in.bias.shape());
        if (Parallel)
            kernels::conv3x3_backward(in.x, in.w3, in.grad, &gx, &gw, &gb);
        else
            kernels::reference::conv3x3_backward(in.x, in.w3, in.grad, &gx, &gw, &gb);
        benchmark::DoNotOptimize(gx);
    }
}

template <bool Parallel>
void conv1x1_fwd(benchmark::State& state)
{
    const Inputs& in = inputs();
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kernels::conv1x1_forward(in.x, in.w1, in.bias)
                                          : kernels::reference::conv1x1_forward(in.x, in.w1, in.bias));
}

template <bool Parallel>
void smooth_fwd(benchmark::State& state)
{
    const Inputs& in = inputs();
    const auto& taps = in.kernel.taps();
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kernels::smooth_forward(in.x, taps)
                                          : kernels::reference::smooth_forward(in.x, taps));
}

template <bool Parallel>
void resize_fwd(benchmark::State& state)
{
    const Inputs& in = inputs();
    for (auto _ : state)
        benchmark::DoNotOptimize(Parallel ? kernels::resize_forward(in.x, 64, 64)
                                          : kernels::reference::resize_forward(in.x, 64, 64));
}

BENCHMARK(conv3x3_fwd<false>)->Name("conv3x3_forward/reference");
BENCHMARK(conv3x3_fwd<true>)->Name("conv3x3_forward/parallel");
BENCHMARK(conv3x3_bwd<false>)->Name("conv3x3_backward/reference");
BENCHMARK(conv3x3_bwd<true>)->Name("conv3x3_backward/parallel");
BENCHMARK(conv1x1_fwd<false>)->Name("conv1x1_forward/reference");
BENCHMARK(conv1x1_fwd<true>)->Name("conv1x1_forward/parallel");
BENCHMARK(smooth_fwd<false>)->Name("smooth_forward/reference");
BENCHMARK(smooth_fwd<true>)->Name("smooth_forward/parallel");
BENCHMARK(resize_fwd<false>)->Name("resize_forward/reference");
BENCHMARK(resize_fwd<true>)->Name("resize_forward/parallel");

}  // namespace

BENCHMARK_MAIN();
