// Throughput of the blocked/OpenMP kernels against the serial reference on
// the convolution shapes that dominate a toy-preset training step.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tide/kernels.hpp"

namespace kn = tide::kernels;

namespace {

struct ConvCase {
  kn::ConvGeometry geom;
  std::vector<float> x, w, b, y, dy, dx, dw, db;

  explicit ConvCase(const kn::ConvGeometry& g) : geom(g) {
    std::mt19937 rng(1);
    std::uniform_real_distribution<float> d(-1, 1);
    auto fill = [&](std::vector<float>& v, std::size_t n) {
      v.resize(n);
      for (auto& e : v) e = d(rng);
    };
    fill(x, static_cast<std::size_t>(g.batch) * g.in_c * g.in_h * g.in_w);
    fill(w, static_cast<std::size_t>(g.out_c) * g.filter_len());
    fill(b, g.out_c);
    fill(y, static_cast<std::size_t>(g.batch) * g.out_c * g.out_h() * g.out_w());
    fill(dy, y.size());
    dx.assign(x.size(), 0);
    dw.assign(w.size(), 0);
    db.assign(b.size(), 0);
  }

  double flops() const {
    return 2.0 * geom.batch * geom.out_c * geom.out_h() * geom.out_w() * geom.filter_len();
  }
};

kn::ConvGeometry geometry(const benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int hw = static_cast<int>(state.range(1));
  return {1, c * 2, hw, hw, c, 3, 1, 1};
}

void BM_ConvForward(benchmark::State& state) {
  ConvCase cc(geometry(state));
  for (auto _ : state) {
    kn::conv2d_forward<float>(cc.geom, cc.x.data(), cc.w.data(), cc.b.data(), cc.y.data());
    benchmark::DoNotOptimize(cc.y.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(cc.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvForwardReference(benchmark::State& state) {
  ConvCase cc(geometry(state));
  for (auto _ : state) {
    kn::reference::conv2d_forward<float>(cc.geom, cc.x.data(), cc.w.data(), cc.b.data(), cc.y.data());
    benchmark::DoNotOptimize(cc.y.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(cc.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvBackward(benchmark::State& state) {
  ConvCase cc(geometry(state));
  for (auto _ : state) {
    kn::conv2d_backward<float>(cc.geom, cc.x.data(), cc.w.data(), cc.dy.data(), cc.dx.data(), cc.dw.data(),
                               cc.db.data());
    benchmark::DoNotOptimize(cc.dx.data());
  }
  state.counters["GFLOPS"] =
      benchmark::Counter(2 * cc.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

void BM_ConvBackwardReference(benchmark::State& state) {
  ConvCase cc(geometry(state));
  for (auto _ : state) {
    kn::reference::conv2d_backward<float>(cc.geom, cc.x.data(), cc.w.data(), cc.dy.data(), cc.dx.data(),
                                          cc.dw.data(), cc.db.data());
    benchmark::DoNotOptimize(cc.dx.data());
  }
  state.counters["GFLOPS"] =
      benchmark::Counter(2 * cc.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

// (output channels, spatial extent): decoder calibration shapes at each level.
#define TIDE_CONV_ARGS ->Args({16, 64})->Args({32, 32})->Args({64, 16})->Unit(benchmark::kMicrosecond)

BENCHMARK(BM_ConvForward) TIDE_CONV_ARGS;
BENCHMARK(BM_ConvForwardReference) TIDE_CONV_ARGS;
BENCHMARK(BM_ConvBackward) TIDE_CONV_ARGS;
BENCHMARK(BM_ConvBackwardReference) TIDE_CONV_ARGS;

}  // namespace

BENCHMARK_MAIN();
