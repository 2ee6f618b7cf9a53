#include <benchmark/benchmark.h>

#include "qsched/env.hpp"
#include "qsched/rng.hpp"

using namespace qsched;

namespace {

BackendRegistry bench_registry() {
  std::vector<QNodeSpec> nodes;
  std::vector<DepthOverhead> overheads;
  for (int i = 0; i < 10; ++i) {
    QNodeSpec n;
    n.id = i;
    n.name = "n" + std::to_string(i);
    n.qubits = 16 + 12 * i;
    n.quantum_volume = 32;
    n.d1cps = 10000.0 + 2000.0 * i;
    nodes.push_back(n);
    overheads.push_back(DepthOverhead{1, 1});
  }
  return BackendRegistry(std::move(nodes), std::move(overheads));
}

std::vector<CircuitRecord> bench_records() {
  std::vector<CircuitRecord> recs;
  for (int q : {4, 12, 20, 33, 48}) {
    CircuitRecord r;
    r.app = "app" + std::to_string(q);
    r.qubits = q;
    r.base_depth = 10 + 4 * q;
    r.default_shots = 1024;
    recs.push_back(r);
  }
  return recs;
}

}  // namespace

static void BM_PlaceAndAdvance(benchmark::State& state) {
  auto reg = bench_registry();
  auto workload = generate_episode_workload(bench_records(), 7, 60, 60.0);
  Rng rng(1);
  for (auto _ : state) {
    DataCenterSim sim(reg);
    sim.add_tasks(workload.tasks);
    for (int i = 0; i < sim.num_tasks(); ++i) {
      sim.advance_to(sim.task(i).arrival);
      sim.try_place(i, rng.uniform_int(10), sim.task(i).arrival);
    }
    sim.drain();
    benchmark::DoNotOptimize(sim.episode_total_completion());
  }
  state.SetItemsProcessed(state.iterations() * 60);
}
BENCHMARK(BM_PlaceAndAdvance);

static void BM_EpisodeRollout(benchmark::State& state) {
  EnvConfig cfg;
  SchedulingEnv env(bench_registry(), bench_records(), cfg);
  Rng rng(3);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    env.reset(seed++);
    while (!env.episode_done()) env.step(rng.uniform_int(env.num_actions()));
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_tasks);
}
BENCHMARK(BM_EpisodeRollout);

BENCHMARK_MAIN();
