#include "qsched/baselines.hpp"

#include "qsched/util.hpp"

namespace qsched {

BaselinePolicy::BaselinePolicy(Kind kind, std::uint64_t seed)
    : kind_(kind), base_seed_(seed), rng_(derive_seed(seed, SeedStream::BaselinePolicy)) {}

void BaselinePolicy::begin_episode(std::uint64_t episode_seed) {
  rr_cursor_ = 0;
  rng_ = Rng(derive_seed(episode_seed ^ base_seed_, SeedStream::BaselinePolicy));
}

int BaselinePolicy::greedy_select(const DataCenterSim& sim, const QTask& task, double now) {
  int m = sim.num_nodes();
  if (task.replacement_count > 0) {
    int best = 0;
    for (int i = 1; i < m; ++i)
      if (sim.node(i).qubits > sim.node(best).qubits) best = i;
    return best;
  }
  int best = 0;
  double best_backlog = sim.backlog(0, now);
  for (int i = 1; i < m; ++i) {
    double b = sim.backlog(i, now);
    if (b < best_backlog) {
      best = i;
      best_backlog = b;
    }
  }
  return best;
}

int BaselinePolicy::select(const SchedulingEnv& env) {
  int m = env.num_actions();
  switch (kind_) {
    case Kind::Greedy:
      return greedy_select(env.sim(), env.current_task(), env.clock());
    case Kind::RoundRobin: {
      int pick = rr_cursor_;
      rr_cursor_ = (rr_cursor_ + 1) % m;
      return pick;
    }
    case Kind::Random:
      return rng_.uniform_int(m);
  }
  throw UsageError("BaselinePolicy: unknown kind");
}

BaselinePolicy::Kind baseline_kind_from_name(const std::string& name) {
  if (name == "greedy") return BaselinePolicy::Kind::Greedy;
  if (name == "roundrobin") return BaselinePolicy::Kind::RoundRobin;
  if (name == "random") return BaselinePolicy::Kind::Random;
  throw ParseError("unknown baseline policy: '" + name + "'");
}

const char* to_string(BaselinePolicy::Kind kind) {
  switch (kind) {
    case BaselinePolicy::Kind::Greedy: return "greedy";
    case BaselinePolicy::Kind::RoundRobin: return "roundrobin";
    case BaselinePolicy::Kind::Random: return "random";
  }
  return "?";
}

}  // namespace qsched
