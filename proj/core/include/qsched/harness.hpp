#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qsched/agent.hpp"
#include "qsched/baselines.hpp"
#include "qsched/config.hpp"
#include "qsched/env.hpp"

namespace qsched {

/// Uniform decision interface for rollouts; the harness swaps policies
/// without touching the environment.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t episode_seed) { (void)episode_seed; }
  virtual int select(const SchedulingEnv& env) = 0;
};

class HeuristicPolicy : public Policy {
 public:
  explicit HeuristicPolicy(BaselinePolicy::Kind kind, std::uint64_t seed = 0)
      : impl_(kind, seed) {}
  std::string name() const override { return to_string(impl_.kind()); }
  void begin_episode(std::uint64_t episode_seed) override { impl_.begin_episode(episode_seed); }
  int select(const SchedulingEnv& env) override { return impl_.select(env); }

 private:
  BaselinePolicy impl_;
};

/// Deterministic evaluation policy: a frozen net with zeroed noise.
class GreedyNetPolicy : public Policy {
 public:
  explicit GreedyNetPolicy(CategoricalQNet net) : net_(std::move(net)) { net_.zero_noise(); }
  std::string name() const override { return "drlq"; }
  int select(const SchedulingEnv& env) override { return net_.greedy_action(env.state()); }

 private:
  CategoricalQNet net_;
};

/// Workload seed for episode `index` of the stream rooted at `base`. Train
/// and eval use the same derivation, so equal bases collide (and the overlap
/// guard can catch them).
std::uint64_t episode_seed(std::uint64_t base, long index);
std::vector<std::uint64_t> episode_seed_sequence(std::uint64_t base, int count);

// ---------------------------------------------------------------------------
// Reports

struct TaskReportRow {
  int task_id = -1;
  std::string app;
  int qubits = 0;
  int base_depth = 0;
  int shots = 0;
  double arrival = 0.0;
  std::string status;
  int node_id = -1;
  double start = 0.0;
  double exec = 0.0;
  double total = 0.0;
  int replacement_count = 0;
};

struct EpisodeReport {
  int index = 0;
  std::uint64_t seed = 0;
  double total_completion = 0.0;
  int reschedules = 0;
  int failed = 0;
  int steps = 0;
  double reward_sum = 0.0;
  std::vector<TaskReportRow> tasks;
};

/// Runs one full episode; the environment must already be reset.
EpisodeReport run_episode(SchedulingEnv& env, Policy& policy, int index, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Training

struct IterationStats {
  int iteration = 0;
  long env_steps = 0;   // cumulative
  int episodes = 0;     // completed within this iteration
  double mean_episode_reward = 0.0;
  double mean_episode_length = 0.0;
  double mean_loss = 0.0;
  long learn_steps = 0;  // cumulative
};

struct TrainResult {
  std::vector<IterationStats> log;
  long episodes_played = 0;   // completed
  long episodes_started = 0;  // includes a trailing partial episode, if any
};

using IterationCallback = std::function<void(const IterationStats&)>;

/// Runs train_iterations x steps_per_iteration environment steps with one
/// learn per step once the buffer is warm. Episode workload seeds come from
/// episode_seed(cfg.train_seed, k).
TrainResult train_agent(RainbowAgent& agent, SchedulingEnv& env, const ExperimentConfig& cfg,
                        const IterationCallback& on_iteration = nullptr);

void write_training_log(const std::vector<IterationStats>& log, std::ostream& out);
std::vector<IterationStats> read_training_log(std::istream& in, const std::string& origin);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  AgentConfig agent;
  NormConstants norm;
  int state_dim = 0;
  int n_actions = 0;
  std::uint64_t train_seed = 0;
  long train_episodes = 0;
  nlohmann::json params;
};

Checkpoint make_checkpoint(RainbowAgent& agent, const NormConstants& norm,
                           std::uint64_t train_seed, long train_episodes);
void save_checkpoint_file(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint_file(const std::string& path);
CategoricalQNet net_from_checkpoint(const Checkpoint& ck);

// ---------------------------------------------------------------------------
// Evaluation and comparison

struct EvalSummary {
  std::string policy;
  std::vector<EpisodeReport> episodes;
  double mean_total = 0.0;
  double stdev_total = 0.0;
  double mean_reschedules = 0.0;
  double mean_failed = 0.0;
};

EvalSummary evaluate_policy(Policy& policy, SchedulingEnv& env,
                            const std::vector<std::uint64_t>& seeds);
EvalSummary evaluate_policy_on_workload(Policy& policy, SchedulingEnv& env,
                                        const EpisodeWorkload& workload);

/// Throws UsageError when any eval seed also appears in the checkpoint's
/// training seed stream (override with allow_overlap).
void check_seed_disjointness(const Checkpoint& ck, const std::vector<std::uint64_t>& eval_seeds,
                             bool allow_overlap);

void write_eval_csv(const EvalSummary& s, std::ostream& out);
void write_task_csv(const EvalSummary& s, std::ostream& out);

struct CompareResult {
  std::vector<EvalSummary> policies;
};

double percent_reduction(double baseline, double candidate);
void write_compare_csv(const CompareResult& r, std::ostream& out);
void write_compare_table(const CompareResult& r, std::ostream& out);

// ---------------------------------------------------------------------------
// Grid-search tuning

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

/// "agent.lr=0.01,0.001;agent.n_step=1,3" -> axes; throws ParseError on
/// malformed specs or (via apply_config_value) unknown keys.
std::vector<GridAxis> parse_grid(const std::string& spec);
std::vector<std::map<std::string, std::string>> grid_points(const std::vector<GridAxis>& axes);

struct TuneTrial {
  int index = 0;
  std::map<std::string, std::string> overrides;
  double score = 0.0;  // mean episode reward over the final quarter
  std::vector<IterationStats> log;
};

struct TuneResult {
  std::vector<TuneTrial> ranked;  // best first
  ExperimentConfig best;
};

/// Trains every grid point at the reduced tune budget; trials run on isolated
/// env/agent copies and may execute in parallel (`jobs` workers).
TuneResult run_tune(const ExperimentConfig& base, const std::vector<GridAxis>& axes, int jobs,
                    const std::function<void(const TuneTrial&)>& on_trial = nullptr);

void write_tune_csv(const TuneResult& r, std::ostream& out);

// ---------------------------------------------------------------------------

SchedulingEnv make_env(const ExperimentConfig& cfg);
SchedulingEnv make_env(const ExperimentConfig& cfg, const NormConstants& norm);

nlohmann::json agent_config_to_json(const AgentConfig& a);
AgentConfig agent_config_from_json(const nlohmann::json& j);
nlohmann::json norm_to_json(const NormConstants& n);
NormConstants norm_from_json(const nlohmann::json& j);

}  // namespace qsched
