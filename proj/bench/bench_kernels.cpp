#include <benchmark/benchmark.h>

#include <numbers>

#include "mse/curve.hpp"
#include "mse/kernels.hpp"

namespace {

mse::curve::SampledCurve bench_curve(std::size_t n) {
  std::vector<mse::curve::Mode> modes{{1, 0.1, 0.2}, {3, 0.03, 1.0}, {5, 0.01, 2.0}};
  return mse::curve::graph_to_curve(mse::curve::PeriodicGraph::from_modes(2 * std::numbers::pi, n, modes));
}

template <mse::kernels::Exec E>
void BM_single_layer(benchmark::State& state) {
  const auto c = bench_curve(static_cast<std::size_t>(state.range(0)));
  Eigen::MatrixXd out;
  for (auto _ : state) {
    mse::kernels::single_layer(c, out, E);
    benchmark::DoNotOptimize(out.data());
  }
}

template <mse::kernels::Exec E>
void BM_normal_gradient(benchmark::State& state) {
  const auto c = bench_curve(static_cast<std::size_t>(state.range(0)));
  Eigen::MatrixXd out;
  for (auto _ : state) {
    mse::kernels::normal_gradient(c, out, E);
    benchmark::DoNotOptimize(out.data());
  }
}

template <mse::kernels::Exec E>
void BM_normal_oscillation(benchmark::State& state) {
  const auto c = bench_curve(static_cast<std::size_t>(state.range(0)));
  const auto radii = mse::kernels::dyadic_radii(c);
  for (auto _ : state) benchmark::DoNotOptimize(mse::kernels::normal_oscillation(c, radii, E));
}

using mse::kernels::Exec;
BENCHMARK(BM_single_layer<Exec::serial>)->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_single_layer<Exec::parallel>)->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_normal_gradient<Exec::serial>)->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_normal_gradient<Exec::parallel>)->RangeMultiplier(2)->Range(64, 512);
BENCHMARK(BM_normal_oscillation<Exec::serial>)->RangeMultiplier(2)->Range(64, 256);
BENCHMARK(BM_normal_oscillation<Exec::parallel>)->RangeMultiplier(2)->Range(64, 256);

}  // namespace

BENCHMARK_MAIN();
