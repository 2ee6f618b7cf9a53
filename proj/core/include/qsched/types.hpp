#pragma once

#include <cstdint>
#include <set>
#include <string>

namespace qsched {

/// Static capabilities of one quantum computation node (a single QPU).
struct QNodeSpec {
  int id = -1;                      // dense index within a registry
  std::string name;
  int qubits = 0;                   // q^w
  int quantum_volume = 0;           // q^v, a power of two
  double d1cps = 0.0;               // q^s, depth-1 circuit layers per second
  std::set<std::string> gate_set;   // q^g
  std::string topology;             // q^t
};

enum class TaskStatus { Pending, Running, Completed, FailedPermanent };

inline const char* to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::Pending: return "pending";
    case TaskStatus::Running: return "running";
    case TaskStatus::Completed: return "completed";
    case TaskStatus::FailedPermanent: return "failed_permanent";
  }
  return "?";
}

/// One gate-based circuit job plus its lifecycle bookkeeping.
struct QTask {
  int id = -1;
  std::string app;                  // source circuit record, for reporting
  int qubits = 0;                   // theta^w
  int base_depth = 0;               // theta^d before node-specific overhead
  std::set<std::string> gates;      // theta^g
  int shots = 0;                    // theta^s
  std::string topology;             // theta^t
  double arrival = 0.0;             // theta^a, seconds
  TaskStatus status = TaskStatus::Pending;
  int replacement_count = 0;        // kappa, only ever increases
};

enum class RejectReason { InsufficientQubits };

inline const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::InsufficientQubits: return "insufficient_qubits";
  }
  return "?";
}

}  // namespace qsched
