// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include "loader/experiment.hpp"
#include "../tests/support.hpp"

namespace {

using namespace loader;

Topology large_topology() {
  testing::Gen g(42);
  return testing::random_topology(g, 120, 0.05);
}

TrafficWeights unit_weights(const Topology& topo) {
  TrafficWeights w;
  for (auto s : topo.switches()) w[s] = 1.0;
  return w;
}

void BM_BetweennessSerial(benchmark::State& state) {
  const auto topo = large_topology();
  const auto w = unit_weights(topo);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_betweenness_serial(topo, w));
}
BENCHMARK(BM_BetweennessSerial)->Unit(benchmark::kMillisecond);

void BM_BetweennessParallel(benchmark::State& state) {
  const auto topo = large_topology();
  const auto w = unit_weights(topo);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_betweenness(topo, w));
}
BENCHMARK(BM_BetweennessParallel)->Unit(benchmark::kMillisecond);

ScenarioConfig short_fig7() {
  auto cfg = load_scenario(testing::scenario_path("fig7_ddos_c2"));
  cfg.t_end = 2;
  return cfg;
}

void BM_SweepSerial(benchmark::State& state) {
  const auto cfg = short_fig7();
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment_serial(cfg, {1, 2, 4}));
}
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);

void BM_SweepParallel(benchmark::State& state) {
  const auto cfg = short_fig7();
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(cfg, {1, 2, 4}));
}
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
