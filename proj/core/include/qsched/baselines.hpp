#pragma once

#include <cstdint>
#include <string>

#include "qsched/env.hpp"
#include "qsched/rng.hpp"

namespace qsched {

/// The three heuristic comparison policies. They read the simulator's queue
/// state directly (equivalent information to the encoded state vector) and
/// drive the same env.step() interface as the learned policy.
class BaselinePolicy {
 public:
  enum class Kind { Greedy, RoundRobin, Random };

  BaselinePolicy(Kind kind, std::uint64_t seed = 0);

  /// Resets per-episode state (RoundRobin cursor, Random stream).
  void begin_episode(std::uint64_t episode_seed);

  int select(const SchedulingEnv& env);

  Kind kind() const { return kind_; }

  /// First attempt: least backlog; any retry: the most qubits. Ties break to
  /// the lowest node index.
  static int greedy_select(const DataCenterSim& sim, const QTask& task, double now);

 private:
  Kind kind_;
  std::uint64_t base_seed_;
  int rr_cursor_ = 0;
  Rng rng_;
};

BaselinePolicy::Kind baseline_kind_from_name(const std::string& name);
const char* to_string(BaselinePolicy::Kind kind);

}  // namespace qsched
