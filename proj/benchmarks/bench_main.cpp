#include <benchmark/benchmark.h>

#include <random>

#include "csflow/background.hpp"
#include "csflow/flowfn.hpp"
#include "csflow/graded.hpp"
#include "csflow/linsolve.hpp"
#include "csflow/propagators.hpp"
#include "csflow/verify.hpp"

using namespace csflow;

namespace {

BackgroundParams params(int time_points, int modes) {
  BackgroundParams p;
  p.time_points = time_points;
  p.modes = modes;
  return p;
}

FlowGrid grid(int n) {
  FlowGrid g;
  g.n_phi = g.n_k = n;
  return g;
}

}  // namespace

static void BM_Volterra(benchmark::State& state) {
  const Background bg(params(static_cast<int>(state.range(0)), 1));
  for (auto _ : state) benchmark::DoNotOptimize(interacting_retarded_volterra(bg, 1, 0.2));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Volterra)->RangeMultiplier(2)->Range(256, 2048)->Complexity()->Unit(benchmark::kMillisecond);

static void BM_Neumann(benchmark::State& state) {
  const Background bg(params(static_cast<int>(state.range(0)), 1));
  for (auto _ : state) benchmark::DoNotOptimize(interacting_retarded_neumann(bg, 1, 0.05, 1e-13));
}
BENCHMARK(BM_Neumann)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_FlowPoint(benchmark::State& state) {
  const Background bg(params(512, static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(flow_point(bg, 0.1));
}
BENCHMARK(BM_FlowPoint)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_LinearSolve(benchmark::State& state) {
  const FlowGrid g = grid(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(1);
  const auto sigma = constant_conductivity(g, 0.5);
  GridField src = random_smooth_field(g, rng);
  for (auto _ : state) benchmark::DoNotOptimize(solve_linearized(sigma, src));
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_LinearSolve)->Arg(65)->Arg(129)->Arg(257)->Arg(513)->Complexity()->Unit(benchmark::kMicrosecond);

static void BM_Smoothing(benchmark::State& state) {
  const FlowGrid g = grid(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(2);
  GridField f = random_smooth_field(g, rng);
  const SmoothingSchedule sched{4.0, Rolloff::quintic, SmoothingBasis::sine_phi};
  for (auto _ : state) benchmark::DoNotOptimize(smoothing_apply(f, 1.0, sched));
}
BENCHMARK(BM_Smoothing)->Arg(65)->Arg(129)->Arg(257)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
