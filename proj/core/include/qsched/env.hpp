#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "qsched/sim.hpp"
#include "qsched/workload.hpp"

namespace qsched {

struct EnvConfig {
  double failure_penalty = -10.0;  // Delta, must stay < 0
  double penalty_factor = 0.1;     // alpha, >= 0
  double discount = 0.99;          // gamma, carried here for n-step consumers
  int n_tasks = 60;
  double window = 60.0;            // seconds
  int max_reschedules = 10;

  void validate() const;
};

// Scales fixed at environment construction so state dimensions and feature
// ranges are identical across episodes (and across train/eval when restored
// from a checkpoint).
struct NormConstants {
  double qubit_scale = 128.0;
  double qv_log_scale = 8.0;
  double shots_scale = 8192.0;
  double max_d1cps = 1.0;   // from registry
  double max_depth = 1.0;   // from circuit records
};

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool task_done = false;     // current task reached a terminal status
  bool episode_done = false;  // every task terminal
  // info
  int task_id = -1;
  int placed_node = -1;                // -1 on rejection
  int replacement_count = 0;           // kappa after this step
  std::optional<double> total_time;    // t_theta when completed
};

struct TraceRecord {
  std::uint64_t state_hash = 0;
  int action = -1;
  double reward = 0.0;
  int replacement_count = 0;
  int task_id = -1;
  int node_id = -1;
};

/// MDP wrapper over the simulator: presents tasks in arrival order, encodes
/// states, maps actions to placements and computes per-step rewards. One
/// instance is single-threaded; independent instances can run in parallel.
class SchedulingEnv {
 public:
  SchedulingEnv(BackendRegistry registry, std::vector<CircuitRecord> records, EnvConfig cfg);
  SchedulingEnv(BackendRegistry registry, std::vector<CircuitRecord> records, EnvConfig cfg,
                NormConstants norm);

  int state_dim() const;
  int num_actions() const { return registry_.size(); }
  const NormConstants& norm() const { return norm_; }
  const EnvConfig& config() const { return cfg_; }
  const BackendRegistry& registry() const { return registry_; }

  /// Fresh simulator + generated workload for this seed; clock moves to the
  /// first arrival. Returns the state for the first pending task.
  Eigen::VectorXd reset(std::uint64_t seed);

  /// Same, but replaying an explicit workload (e.g. from a dump file).
  Eigen::VectorXd reset_with_workload(EpisodeWorkload workload);

  StepResult step(int action);

  bool episode_started() const { return sim_ != nullptr; }
  bool episode_done() const;
  const Eigen::VectorXd& state() const;
  const QTask& current_task() const;
  double clock() const;
  const DataCenterSim& sim() const;

  int steps_taken() const { return steps_taken_; }
  double reward_sum() const { return reward_sum_; }

  const std::vector<TraceRecord>& trace() const { return trace_; }
  void write_trace(std::ostream& out) const;

  /// State encoding: per node [q^w, log2(q^v), q^s, backlog] followed by the
  /// current task's [theta^w, theta^d, theta^s], all normalized.
  Eigen::VectorXd encode_state(const DataCenterSim& sim, const QTask& task) const;

 private:
  Eigen::VectorXd begin_episode(EpisodeWorkload workload);
  Eigen::VectorXd encode_current() const;
  void advance_to_next_task();

  BackendRegistry registry_;
  std::vector<CircuitRecord> records_;
  EnvConfig cfg_;
  NormConstants norm_;

  std::unique_ptr<DataCenterSim> sim_;
  int current_task_ = -1;  // -1 when episode finished (or not started)
  Eigen::VectorXd state_;
  int steps_taken_ = 0;
  double reward_sum_ = 0.0;
  std::vector<TraceRecord> trace_;
};

/// Success pays the inverse total completion time discounted by alpha*kappa;
/// failure pays the penalty magnified by it.
double placement_reward(bool success, double total_time, int replacement_count,
                        const EnvConfig& cfg);

}  // namespace qsched
