#include <benchmark/benchmark.h>

#include "qsched/agent.hpp"

using namespace qsched;

namespace {

CategoricalQNet bench_net(Rng& rng) {
  QNetConfig cfg;
  cfg.input_dim = 43;
  cfg.n_actions = 10;
  cfg.n_atoms = 10;
  cfg.hidden = {128, 128};
  return CategoricalQNet(cfg, rng);
}

Matrix random_batch(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform();
  return m;
}

}  // namespace

static void BM_ForwardBatch1(benchmark::State& state) {
  Rng rng(1);
  auto net = bench_net(rng);
  Matrix x = random_batch(1, 43, rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_ForwardBatch1);

static void BM_ForwardBatch180(benchmark::State& state) {
  Rng rng(1);
  auto net = bench_net(rng);
  Matrix x = random_batch(180, 43, rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * 180);
}
BENCHMARK(BM_ForwardBatch180);

static void BM_ForwardBackward180(benchmark::State& state) {
  Rng rng(1);
  auto net = bench_net(rng);
  Matrix x = random_batch(180, 43, rng);
  Matrix dlogits = random_batch(180, 100, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x, true));
    net.backward(dlogits);
  }
  state.SetItemsProcessed(state.iterations() * 180);
}
BENCHMARK(BM_ForwardBackward180);

static void BM_Projection(benchmark::State& state) {
  Rng rng(2);
  Vector support = Vector::LinSpaced(10, -10.0, 10.0);
  Matrix next = random_batch(180, 10, rng);
  for (int i = 0; i < next.rows(); ++i) next.row(i) /= next.row(i).sum();
  std::vector<double> returns(180), bootstrap(180);
  for (int i = 0; i < 180; ++i) {
    returns[i] = rng.uniform(-12, 12);
    bootstrap[i] = rng.uniform() < 0.5 ? 0.0 : 0.97;
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(project_distribution(next, returns, bootstrap, support));
}
BENCHMARK(BM_Projection);

BENCHMARK_MAIN();
