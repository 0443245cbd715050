#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "nnse/forward.hpp"
#include "nnse/kernels.hpp"
#include "nnse/model.hpp"

using namespace nnse;

namespace {

std::vector<double> uniform(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// mnist-sized: conv16-relu-pool-conv32-relu-pool-flatten-dense128-relu-dense10
Model mnist_sized() {
  ModelSpec spec{"bench",
                 TensorShape{28, 28, 1},
                 {LayerSpec::conv2d(16, {3, 3}), LayerSpec::relu(), LayerSpec::maxpool2d({2, 2}, {2, 2}),
                  LayerSpec::conv2d(32, {3, 3}), LayerSpec::relu(), LayerSpec::maxpool2d({2, 2}, {2, 2}),
                  LayerSpec::flatten(), LayerSpec::dense(128), LayerSpec::relu(), LayerSpec::dense(10)}};
  auto shapes = [](std::initializer_list<std::size_t> w, std::size_t b, unsigned seed) {
    const TensorShape ws(w);
    return LayerParams{Tensor(ws, uniform(ws.element_count(), -0.05, 0.05, seed)),
                       Tensor(TensorShape{b}, uniform(b, -0.1, 0.1, seed + 1))};
  };
  std::vector<LayerParams> p(10);
  p[0] = shapes({3, 3, 1, 16}, 16, 1);
  p[3] = shapes({3, 3, 16, 32}, 32, 3);
  p[7] = shapes({800, 128}, 128, 5);
  p[9] = shapes({128, 10}, 10, 7);
  return Model(spec, std::move(p));
}

template <bool Par>
void BM_Dense(benchmark::State& state) {
  const kernels::DenseGeometry g{static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1))};
  auto in = uniform(g.inputs, -1, 1, 1), w = uniform(g.inputs * g.units, -1, 1, 2), b = uniform(g.units, -1, 1, 3);
  std::vector<double> out(g.units);
  for (auto _ : state) {
    if constexpr (Par) {
      kernels::parallel::dense(in, w, b, g, out);
    } else {
      kernels::serial::dense(in, w, b, g, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Par>
void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto f = static_cast<std::size_t>(state.range(1));
  const LayerSpec layer = LayerSpec::conv2d(f, {3, 3});
  const auto g = kernels::WindowGeometry::for_layer(layer, TensorShape{28, 28, c});
  auto in = uniform(28 * 28 * c, 0, 1, 1), w = uniform(9 * c * f, -1, 1, 2), b = uniform(f, -1, 1, 3);
  std::vector<double> out(g.out_h * g.out_w * g.out_c);
  for (auto _ : state) {
    if constexpr (Par) {
      kernels::parallel::conv2d(in, w, b, g, out);
    } else {
      kernels::serial::conv2d(in, w, b, g, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Par>
void BM_MaxPool(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto g = kernels::WindowGeometry::for_layer(LayerSpec::maxpool2d({2, 2}, {2, 2}), TensorShape{26, 26, c});
  auto in = uniform(26 * 26 * c, -1, 1, 1);
  std::vector<double> out(g.out_h * g.out_w * g.out_c);
  std::vector<std::uint32_t> choice(out.size());
  for (auto _ : state) {
    if constexpr (Par) {
      kernels::parallel::maxpool2d(in, g, out, choice);
    } else {
      kernels::serial::maxpool2d(in, g, out, choice);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Par>
void BM_Relu(benchmark::State& state) {
  auto in = uniform(static_cast<std::size_t>(state.range(0)), -1, 1, 1);
  std::vector<double> out(in.size());
  std::vector<std::uint8_t> active(in.size());
  for (auto _ : state) {
    if constexpr (Par) {
      kernels::parallel::relu(in, out, active);
    } else {
      kernels::serial::relu(in, out, active);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <Backend B>
void BM_Forward(benchmark::State& state) {
  static const Model model = mnist_sized();
  const Tensor x(TensorShape{28, 28, 1}, uniform(784, 0, 255, 9));
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x, B).prediction.label);
  state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_Dense<false>)->Name("dense/serial")->Args({800, 128})->Args({128, 10});
BENCHMARK(BM_Dense<true>)->Name("dense/parallel")->Args({800, 128})->Args({128, 10});
BENCHMARK(BM_Conv2d<false>)->Name("conv2d/serial")->Args({1, 16})->Args({16, 32});
BENCHMARK(BM_Conv2d<true>)->Name("conv2d/parallel")->Args({1, 16})->Args({16, 32});
BENCHMARK(BM_MaxPool<false>)->Name("maxpool2d/serial")->Arg(16);
BENCHMARK(BM_MaxPool<true>)->Name("maxpool2d/parallel")->Arg(16);
BENCHMARK(BM_Relu<false>)->Name("relu/serial")->Arg(10816);
BENCHMARK(BM_Relu<true>)->Name("relu/parallel")->Arg(10816);
BENCHMARK(BM_Forward<Backend::Serial>)->Name("forward/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Forward<Backend::Parallel>)->Name("forward/parallel")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
