#include "qsched/env.hpp"

#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "qsched/util.hpp"

namespace qsched {

void EnvConfig::validate() const {
  if (!(failure_penalty < 0.0)) throw UsageError("EnvConfig: failure_penalty must be < 0");
  if (penalty_factor < 0.0) throw UsageError("EnvConfig: penalty_factor must be >= 0");
  if (discount < 0.0 || discount > 1.0) throw UsageError("EnvConfig: discount must be in [0,1]");
  if (n_tasks < 1) throw UsageError("EnvConfig: n_tasks must be >= 1");
  if (!(window > 0.0)) throw UsageError("EnvConfig: window must be > 0");
  if (max_reschedules < 1) throw UsageError("EnvConfig: max_reschedules must be >= 1");
}

double placement_reward(bool success, double total_time, int replacement_count,
                        const EnvConfig& cfg) {
  double k = static_cast<double>(replacement_count);
  if (success) return (1.0 / total_time) * (1.0 - cfg.penalty_factor * k);
  return cfg.failure_penalty * (1.0 + cfg.penalty_factor * k);
}

namespace {

NormConstants make_norm(const BackendRegistry& registry,
                        const std::vector<CircuitRecord>& records) {
  NormConstants n;
  n.max_d1cps = registry.max_d1cps();
  n.max_depth = static_cast<double>(max_record_depth(records));
  return n;
}

}  // namespace

SchedulingEnv::SchedulingEnv(BackendRegistry registry, std::vector<CircuitRecord> records,
                             EnvConfig cfg)
    : SchedulingEnv(std::move(registry), std::move(records), cfg, NormConstants{}) {
  norm_ = make_norm(registry_, records_);
}

SchedulingEnv::SchedulingEnv(BackendRegistry registry, std::vector<CircuitRecord> records,
                             EnvConfig cfg, NormConstants norm)
    : registry_(std::move(registry)),
      records_(std::move(records)),
      cfg_(cfg),
      norm_(norm) {
  cfg_.validate();
  if (registry_.size() < 1) throw UsageError("SchedulingEnv: registry is empty");
}

int SchedulingEnv::state_dim() const { return registry_.size() * 4 + 3; }

Eigen::VectorXd SchedulingEnv::encode_state(const DataCenterSim& sim, const QTask& task) const {
  int m = registry_.size();
  Eigen::VectorXd s(state_dim());
  double now = sim.clock();
  for (int i = 0; i < m; ++i) {
    const QNodeSpec& n = registry_.node(i);
    s[4 * i + 0] = n.qubits / norm_.qubit_scale;
    s[4 * i + 1] = std::log2(static_cast<double>(n.quantum_volume)) / norm_.qv_log_scale;
    s[4 * i + 2] = n.d1cps / norm_.max_d1cps;
    s[4 * i + 3] = sim.backlog(i, now) / cfg_.window;
  }
  s[4 * m + 0] = task.qubits / norm_.qubit_scale;
  s[4 * m + 1] = task.base_depth / norm_.max_depth;
  s[4 * m + 2] = task.shots / norm_.shots_scale;
  return s;
}

Eigen::VectorXd SchedulingEnv::encode_current() const {
  if (current_task_ >= 0) return encode_state(*sim_, sim_->task(current_task_));
  QTask none;  // terminal observation: task-feature slots read as zero
  return encode_state(*sim_, none);
}

Eigen::VectorXd SchedulingEnv::reset(std::uint64_t seed) {
  return begin_episode(generate_episode_workload(records_, seed, cfg_.n_tasks, cfg_.window));
}

Eigen::VectorXd SchedulingEnv::reset_with_workload(EpisodeWorkload workload) {
  if (workload.tasks.empty()) throw UsageError("reset_with_workload: empty workload");
  return begin_episode(std::move(workload));
}

Eigen::VectorXd SchedulingEnv::begin_episode(EpisodeWorkload workload) {
  sim_ = std::make_unique<DataCenterSim>(registry_);
  sim_->add_tasks(std::move(workload.tasks));
  current_task_ = 0;
  steps_taken_ = 0;
  reward_sum_ = 0.0;
  trace_.clear();
  sim_->advance_to(sim_->task(0).arrival);
  state_ = encode_current();
  return state_;
}

bool SchedulingEnv::episode_done() const {
  return sim_ != nullptr && current_task_ < 0;
}

const Eigen::VectorXd& SchedulingEnv::state() const {
  if (!sim_) throw UsageError("state(): episode not started");
  return state_;
}

const QTask& SchedulingEnv::current_task() const {
  if (!sim_ || current_task_ < 0) throw UsageError("current_task(): no pending task");
  return sim_->task(current_task_);
}

double SchedulingEnv::clock() const {
  if (!sim_) throw UsageError("clock(): episode not started");
  return sim_->clock();
}

const DataCenterSim& SchedulingEnv::sim() const {
  if (!sim_) throw UsageError("sim(): episode not started");
  return *sim_;
}

void SchedulingEnv::advance_to_next_task() {
  int next = current_task_ + 1;
  if (next >= sim_->num_tasks()) {
    current_task_ = -1;
    sim_->drain();
    return;
  }
  current_task_ = next;
  sim_->advance_to(sim_->task(next).arrival);
}

StepResult SchedulingEnv::step(int action) {
  if (!sim_) throw UsageError("step(): episode not started");
  if (current_task_ < 0) throw UsageError("step(): episode already done");
  if (action < 0 || action >= registry_.size())
    throw UsageError("step(): action " + std::to_string(action) + " out of range");

  int task_id = current_task_;
  std::uint64_t state_hash =
      fnv1a(state_.data(), static_cast<std::size_t>(state_.size()) * sizeof(double));

  StepResult result;
  result.task_id = task_id;

  PlacementOutcome outcome = sim_->try_place(task_id, action, sim_->clock());
  if (outcome.accepted) {
    const QTask& t = sim_->task(task_id);
    result.reward = placement_reward(true, outcome.total_time, t.replacement_count, cfg_);
    result.task_done = true;
    result.placed_node = action;
    result.replacement_count = t.replacement_count;
    result.total_time = outcome.total_time;
    advance_to_next_task();
  } else {
    QTask& t = sim_->mutable_task(task_id);
    t.replacement_count += 1;
    result.reward = placement_reward(false, 0.0, t.replacement_count, cfg_);
    result.replacement_count = t.replacement_count;
    result.placed_node = -1;
    if (t.replacement_count > cfg_.max_reschedules) {
      sim_->mark_failed_permanent(task_id);
      result.task_done = true;
      advance_to_next_task();
    } else {
      result.task_done = false;  // same task re-presented at the same clock
    }
  }

  result.episode_done = current_task_ < 0;
  state_ = encode_current();
  result.next_state = state_;

  steps_taken_ += 1;
  reward_sum_ += result.reward;
  trace_.push_back(TraceRecord{state_hash, action, result.reward, result.replacement_count,
                               task_id, result.placed_node});
  return result;
}

void SchedulingEnv::write_trace(std::ostream& out) const {
  for (const auto& r : trace_) {
    nlohmann::json j;
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(r.state_hash));
    j["state_hash"] = buf;
    j["action"] = r.action;
    j["reward"] = r.reward;
    j["kappa"] = r.replacement_count;
    j["task_id"] = r.task_id;
    j["node_id"] = r.node_id;
    out << j.dump() << "\n";
  }
}

}  // namespace qsched
