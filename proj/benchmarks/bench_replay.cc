#include <benchmark/benchmark.h>

#include "qsched/replay.hpp"

using namespace qsched;

namespace {

Transition bench_transition(Rng& rng) {
  Transition t;
  t.s = Eigen::VectorXd::Constant(43, rng.uniform());
  t.s2 = Eigen::VectorXd::Constant(43, rng.uniform());
  t.action = rng.uniform_int(10);
  t.reward = rng.uniform(-10, 10);
  t.done = rng.uniform() < 0.9;
  t.n_used = 3;
  return t;
}

}  // namespace

static void BM_Push(benchmark::State& state) {
  Rng rng(1);
  PrioritizedReplay replay(50000, 0.6);
  for (auto _ : state) replay.push(bench_transition(rng));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Push);

static void BM_SampleBatch180(benchmark::State& state) {
  Rng rng(1);
  PrioritizedReplay replay(50000, 0.6);
  for (int i = 0; i < 50000; ++i) replay.push(bench_transition(rng));
  for (int i = 0; i < 50000; i += 7) replay.update_priority(i, rng.uniform(0.01, 4.0));
  for (auto _ : state) benchmark::DoNotOptimize(replay.sample(180, 0.6, rng));
  state.SetItemsProcessed(state.iterations() * 180);
}
BENCHMARK(BM_SampleBatch180);

static void BM_PriorityUpdate(benchmark::State& state) {
  Rng rng(1);
  PrioritizedReplay replay(50000, 0.6);
  for (int i = 0; i < 50000; ++i) replay.push(bench_transition(rng));
  int i = 0;
  for (auto _ : state) {
    replay.update_priority(i % 50000, 0.01 + (i % 97) * 0.05);
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_PriorityUpdate);

BENCHMARK_MAIN();
