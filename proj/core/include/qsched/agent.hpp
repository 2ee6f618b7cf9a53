#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "qsched/nn.hpp"
#include "qsched/replay.hpp"

namespace qsched {

struct AgentConfig {
  double discount = 0.99;          // gamma
  int n_step = 3;
  int batch_size = 180;
  int n_atoms = 10;
  double v_min = -10.0;
  double v_max = 10.0;
  double lr = 0.01;
  int target_sync_period = 500;    // learn steps between hard syncs
  double per_alpha = 0.6;
  double per_beta0 = 0.4;
  double per_beta1 = 1.0;
  long per_beta_anneal_steps = 99000;  // learn steps to anneal beta over
  int replay_capacity = 50000;
  int warmup = 1000;               // transitions before learning starts
  double priority_floor = 1e-3;
  std::vector<int> hidden{128, 128};

  void validate() const;
};

/// Projects a value distribution through the Bellman map
/// Tz_k = clip(R + bootstrap * z_k, v_min, v_max), splitting each atom's mass
/// linearly between its neighboring support points.
///   next_probs: [B x K] distributions (already gathered at the chosen action)
///   returns:    per-row aggregated reward R
///   bootstrap:  per-row gamma^n_used * (1 - done)
Matrix project_distribution(const Matrix& next_probs, const std::vector<double>& returns,
                            const std::vector<double>& bootstrap, const Vector& support);

/// Distributional Q-learning agent: noisy-net exploration, Double-DQN action
/// selection, n-step returns, categorical targets and prioritized replay.
class RainbowAgent {
 public:
  RainbowAgent(int state_dim, int n_actions, AgentConfig cfg, std::uint64_t seed);

  /// Greedy action under the online (noisy) net; ties break to lowest index.
  int act(const Eigen::VectorXd& state);

  void begin_episode();
  /// Stages a raw step; emits an n-step aggregate into replay once the
  /// staging window is full.
  void observe(const Eigen::VectorXd& s, int action, double reward,
               const Eigen::VectorXd& s2, bool done);
  /// Flushes the remaining (shorter) windows at episode end.
  void end_episode();

  bool ready_to_learn() const;
  /// One prioritized distributional update; returns the IS-weighted loss.
  /// Requires sync_target() to have been called at least once.
  double learn();
  void sync_target();
  bool target_synced() const { return target_synced_; }
  long sync_count() const { return sync_count_; }

  void resample_noise();
  void zero_noise();

  /// Double-DQN categorical targets for a sampled batch: action selected by
  /// the online net's expected values at s', distribution taken from the
  /// target net, then projected onto the support.
  Matrix project_target(const std::vector<const Transition*>& batch);

  long learn_steps() const { return learn_steps_; }
  double current_beta() const;

  const AgentConfig& config() const { return cfg_; }
  CategoricalQNet& online_net() { return online_; }
  CategoricalQNet& target_net() { return target_; }
  PrioritizedReplay& replay() { return replay_; }
  const PrioritizedReplay& replay() const { return replay_; }
  int state_dim() const { return state_dim_; }
  int num_actions() const { return n_actions_; }

 private:
  struct RawStep {
    Eigen::VectorXd s, s2;
    int action;
    double reward;
    bool done;
  };

  void emit_front(int len);

  int state_dim_;
  int n_actions_;
  AgentConfig cfg_;
  Rng rng_;
  CategoricalQNet online_;
  CategoricalQNet target_;
  AdamOptimizer opt_;
  PrioritizedReplay replay_;
  std::deque<RawStep> stage_;
  bool episode_active_ = false;
  bool target_synced_ = false;
  long learn_steps_ = 0;
  long sync_count_ = 0;
};

}  // namespace qsched
