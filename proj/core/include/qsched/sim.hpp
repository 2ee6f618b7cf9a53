#pragma once

#include <deque>
#include <iosfwd>
#include <queue>
#include <vector>

#include "qsched/types.hpp"
#include "qsched/workload.hpp"

namespace qsched {

/// Result of attempting to place a task on a node. Accepted placements carry
/// the full analytic timeline: total_time == completion_time - arrival ==
/// wait + exec.
struct PlacementOutcome {
  bool accepted = false;
  double start_time = 0.0;
  double exec_time = 0.0;
  double completion_time = 0.0;
  double total_time = 0.0;
  RejectReason rejection_reason = RejectReason::InsufficientQubits;
};

enum class EventKind { Place, Reject, Complete, FailPermanent };

const char* to_string(EventKind k);

struct Event {
  int seq = 0;          // global emission order, breaks timestamp ties
  double t = 0.0;
  EventKind kind = EventKind::Place;
  int task_id = -1;
  int node_id = -1;     // -1 when not node-specific
  std::string detail;   // compact key=value list
};

/// Execution time of `task` on `node` at the given post-transpilation depth:
/// effective_depth * shots / d1cps.
double estimate_execution_time(const QTask& task, const QNodeSpec& node, int effective_depth);

/// Deterministic data-center simulator. Nodes run strictly FIFO queues; a
/// placement's start, execution and completion times are computed
/// analytically from the queue state at placement time. The clock only moves
/// through advance_to()/drain().
class DataCenterSim {
 public:
  explicit DataCenterSim(const BackendRegistry& registry);

  /// Installs the episode's tasks (all Pending). Task ids must be dense 0..n-1.
  void add_tasks(std::vector<QTask> tasks);

  double clock() const { return clock_; }
  int num_nodes() const;
  int num_tasks() const { return static_cast<int>(tasks_.size()); }

  const QTask& task(int task_id) const;
  QTask& mutable_task(int task_id);
  const QNodeSpec& node(int node_id) const;

  /// Seconds of backlog on a node at time `now` (0 if idle).
  double backlog(int node_id, double now) const;
  double node_free_at(int node_id) const;

  /// Attempts to place a Pending task on a node at time `now`. On success the
  /// task enters the node FIFO and its timeline is fixed; on rejection
  /// (insufficient qubits) the task stays Pending and no simulated time is
  /// consumed. The replacement counter is the caller's responsibility.
  PlacementOutcome try_place(int task_id, int node_id, double now);

  /// Moves the clock forward, completing every queued task whose completion
  /// time has passed. The clock never moves backwards.
  void advance_to(double t);

  /// Advances past the last queued completion so every Running task finishes.
  void drain();

  /// Marks a Pending task permanently failed (placement given up).
  void mark_failed_permanent(int task_id);

  bool all_terminal() const;

  /// Sum of total completion times over Completed tasks. Tasks that failed
  /// permanently are excluded from the sum but reported via failed_count().
  /// Throws UsageError if any task is still Pending or Running.
  double episode_total_completion() const;
  int failed_count() const;

  struct TaskTimeline {
    int node_id = -1;
    double start = 0.0;
    double exec = 0.0;
    double completion = 0.0;
    double total = 0.0;
  };
  const TaskTimeline& timeline(int task_id) const;

  const std::vector<Event>& events() const { return events_; }
  void write_event_log(std::ostream& out) const;

 private:
  struct NodeState {
    double free_at = 0.0;
    std::deque<int> queue;  // task ids, FIFO
  };

  struct Pending {
    double completion;
    int seq;
    int task_id;
    int node_id;
    bool operator>(const Pending& o) const {
      if (completion != o.completion) return completion > o.completion;
      return seq > o.seq;
    }
  };

  void check_task_id(int task_id) const;
  void push_event(double t, EventKind kind, int task_id, int node_id, std::string detail);

  const BackendRegistry* registry_;
  std::vector<NodeState> nodes_;
  std::vector<QTask> tasks_;
  std::vector<TaskTimeline> timelines_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> completions_;
  std::vector<Event> events_;
  double clock_ = 0.0;
  int next_seq_ = 0;
};

}  // namespace qsched
