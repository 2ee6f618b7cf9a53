#include "qsched/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qsched/util.hpp"

namespace qsched {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Place: return "place";
    case EventKind::Reject: return "reject";
    case EventKind::Complete: return "complete";
    case EventKind::FailPermanent: return "fail_permanent";
  }
  return "?";
}

double estimate_execution_time(const QTask& task, const QNodeSpec& node, int effective_depth) {
  if (effective_depth < 1) throw UsageError("estimate_execution_time: depth must be >= 1");
  if (task.shots < 1) throw UsageError("estimate_execution_time: shots must be >= 1");
  if (!(node.d1cps > 0.0)) throw UsageError("estimate_execution_time: d1cps must be > 0");
  // Exact integer product, one rounding in the division.
  double layer_shots =
      static_cast<double>(static_cast<std::int64_t>(effective_depth) * task.shots);
  return layer_shots / node.d1cps;
}

DataCenterSim::DataCenterSim(const BackendRegistry& registry)
    : registry_(&registry), nodes_(static_cast<std::size_t>(registry.size())) {}

void DataCenterSim::add_tasks(std::vector<QTask> tasks) {
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].id != static_cast<int>(i))
      throw UsageError("add_tasks: task ids must be dense 0..n-1");
    if (tasks[i].status != TaskStatus::Pending)
      throw UsageError("add_tasks: tasks must be Pending");
  }
  tasks_ = std::move(tasks);
  timelines_.assign(tasks_.size(), TaskTimeline{});
}

int DataCenterSim::num_nodes() const { return registry_->size(); }

void DataCenterSim::check_task_id(int task_id) const {
  if (task_id < 0 || task_id >= num_tasks())
    throw UsageError("unknown task id " + std::to_string(task_id));
}

const QTask& DataCenterSim::task(int task_id) const {
  check_task_id(task_id);
  return tasks_[static_cast<std::size_t>(task_id)];
}

QTask& DataCenterSim::mutable_task(int task_id) {
  check_task_id(task_id);
  return tasks_[static_cast<std::size_t>(task_id)];
}

const QNodeSpec& DataCenterSim::node(int node_id) const { return registry_->node(node_id); }

double DataCenterSim::backlog(int node_id, double now) const {
  return std::max(0.0, node_free_at(node_id) - now);
}

double DataCenterSim::node_free_at(int node_id) const {
  registry_->node(node_id);  // id validation
  return nodes_[static_cast<std::size_t>(node_id)].free_at;
}

void DataCenterSim::push_event(double t, EventKind kind, int task_id, int node_id,
                               std::string detail) {
  events_.push_back(Event{next_seq_++, t, kind, task_id, node_id, std::move(detail)});
}

PlacementOutcome DataCenterSim::try_place(int task_id, int node_id, double now) {
  check_task_id(task_id);
  const QNodeSpec& spec = registry_->node(node_id);
  QTask& t = tasks_[static_cast<std::size_t>(task_id)];
  if (t.status != TaskStatus::Pending)
    throw UsageError("try_place: task " + std::to_string(task_id) + " is not Pending");
  if (now < t.arrival)
    throw UsageError("try_place: now precedes arrival of task " + std::to_string(task_id));

  PlacementOutcome outcome;
  if (t.qubits > spec.qubits) {  // capacity constraint
    outcome.accepted = false;
    outcome.rejection_reason = RejectReason::InsufficientQubits;
    push_event(now, EventKind::Reject, task_id, node_id,
               std::string("reason=") + to_string(outcome.rejection_reason));
    return outcome;
  }

  NodeState& node_state = nodes_[static_cast<std::size_t>(node_id)];
  int depth = effective_depth(t.base_depth, registry_->overhead(node_id));
  double exec = estimate_execution_time(t, spec, depth);
  double start = std::max(now, node_state.free_at);  // behind the queue predecessor

  outcome.accepted = true;
  outcome.start_time = start;
  outcome.exec_time = exec;
  outcome.completion_time = start + exec;
  outcome.total_time = outcome.completion_time - t.arrival;

  node_state.free_at = outcome.completion_time;
  node_state.queue.push_back(task_id);
  t.status = TaskStatus::Running;

  TaskTimeline& tl = timelines_[static_cast<std::size_t>(task_id)];
  tl.node_id = node_id;
  tl.start = start;
  tl.exec = exec;
  tl.completion = outcome.completion_time;
  tl.total = outcome.total_time;

  std::ostringstream detail;
  detail << "start=" << start << ";exec=" << exec << ";completion=" << tl.completion;
  push_event(now, EventKind::Place, task_id, node_id, detail.str());
  completions_.push(Pending{tl.completion, next_seq_, task_id, node_id});
  return outcome;
}

void DataCenterSim::advance_to(double t) {
  if (t > clock_) clock_ = t;
  while (!completions_.empty() && completions_.top().completion <= clock_) {
    Pending p = completions_.top();
    completions_.pop();
    NodeState& node_state = nodes_[static_cast<std::size_t>(p.node_id)];
    // FIFO: the finishing task is necessarily at the queue head.
    if (node_state.queue.empty() || node_state.queue.front() != p.task_id)
      throw UsageError("completion order violated node FIFO");
    node_state.queue.pop_front();
    tasks_[static_cast<std::size_t>(p.task_id)].status = TaskStatus::Completed;
    push_event(p.completion, EventKind::Complete, p.task_id, p.node_id, "");
  }
}

void DataCenterSim::drain() {
  double last = clock_;
  if (!completions_.empty()) {
    // Largest completion currently queued equals max over node free_at.
    for (const auto& n : nodes_) last = std::max(last, n.free_at);
  }
  advance_to(last);
}

void DataCenterSim::mark_failed_permanent(int task_id) {
  check_task_id(task_id);
  QTask& t = tasks_[static_cast<std::size_t>(task_id)];
  if (t.status != TaskStatus::Pending)
    throw UsageError("mark_failed_permanent: task is not Pending");
  t.status = TaskStatus::FailedPermanent;
  push_event(clock_, EventKind::FailPermanent, task_id, -1, "");
}

bool DataCenterSim::all_terminal() const {
  return std::all_of(tasks_.begin(), tasks_.end(), [](const QTask& t) {
    return t.status == TaskStatus::Completed || t.status == TaskStatus::FailedPermanent;
  });
}

double DataCenterSim::episode_total_completion() const {
  double sum = 0.0;
  for (const auto& t : tasks_) {
    switch (t.status) {
      case TaskStatus::Completed:
        sum += timelines_[static_cast<std::size_t>(t.id)].total;
        break;
      case TaskStatus::FailedPermanent:
        break;  // tallied via failed_count()
      default:
        throw UsageError("episode_total_completion: task " + std::to_string(t.id) +
                         " is not terminal");
    }
  }
  return sum;
}

int DataCenterSim::failed_count() const {
  return static_cast<int>(std::count_if(tasks_.begin(), tasks_.end(), [](const QTask& t) {
    return t.status == TaskStatus::FailedPermanent;
  }));
}

const DataCenterSim::TaskTimeline& DataCenterSim::timeline(int task_id) const {
  check_task_id(task_id);
  return timelines_[static_cast<std::size_t>(task_id)];
}

void DataCenterSim::write_event_log(std::ostream& out) const {
  for (const auto& e : events_) {
    nlohmann::json j;
    j["seq"] = e.seq;
    j["t"] = e.t;
    j["kind"] = to_string(e.kind);
    j["task_id"] = e.task_id;
    j["node_id"] = e.node_id;
    j["detail"] = e.detail;
    out << j.dump() << "\n";
  }
}

}  // namespace qsched
