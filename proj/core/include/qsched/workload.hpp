#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsched/types.hpp"

namespace qsched {

// Transpilation depth-inflation multiplier, kept as the exact decimal
// fraction it was written as so that ceil(depth * overhead) follows decimal
// arithmetic (an overhead of 1.37 applied to depth 100 gives 137, not 138).
struct DepthOverhead {
  std::int64_t num = 1;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool identity() const { return num == den; }
};

// Parses a nonnegative decimal literal such as "1", "1.37" or "2.05".
DepthOverhead parse_overhead(const std::string& text);

/// ceil(base_depth * overhead), evaluated exactly in integer arithmetic.
int effective_depth(int base_depth, const DepthOverhead& overhead);

struct CircuitRecord {
  std::string app;
  int qubits = 0;
  int base_depth = 0;
  std::set<std::string> gates;
  int default_shots = 1024;
};

class BackendRegistry {
 public:
  BackendRegistry() = default;
  BackendRegistry(std::vector<QNodeSpec> nodes, std::vector<DepthOverhead> overheads);

  int size() const { return static_cast<int>(nodes_.size()); }
  const QNodeSpec& node(int id) const;
  const std::vector<QNodeSpec>& nodes() const { return nodes_; }
  const DepthOverhead& overhead(int id) const;

  double max_d1cps() const;
  int max_qubits() const;
  int min_qubits() const;

 private:
  std::vector<QNodeSpec> nodes_;
  std::vector<DepthOverhead> overheads_;
};

/// Loads a backends CSV (columns name,qubits,qv,d1cps,gates,topology,overhead).
/// Ids are assigned densely in file order. Throws ParseError naming the
/// offending row on invalid input.
BackendRegistry load_backend_registry(const std::string& path);
BackendRegistry parse_backend_registry(std::istream& in, const std::string& origin);

/// Loads a circuits CSV (columns app,qubits,base_depth,gates,shots; shots may
/// be empty, defaulting to 1024).
std::vector<CircuitRecord> load_circuit_records(const std::string& path);
std::vector<CircuitRecord> parse_circuit_records(std::istream& in, const std::string& origin);

int max_record_depth(const std::vector<CircuitRecord>& records);

struct EpisodeWorkload {
  std::vector<QTask> tasks;   // sorted by arrival
  double window = 0.0;        // seconds
  std::uint64_t seed = 0;
};

/// Draws n tasks uniformly from `records` (with replacement) and gives them
/// independent uniform arrival times on [0, window), sorted ascending -- a
/// Poisson arrival process conditioned on its count. Pure function of the
/// arguments.
EpisodeWorkload generate_episode_workload(const std::vector<CircuitRecord>& records,
                                          std::uint64_t seed, int n, double window);

/// JSON-lines dump/load of a workload for exact replay across runs.
void dump_workload(const EpisodeWorkload& workload, std::ostream& out);
void dump_workload_file(const EpisodeWorkload& workload, const std::string& path);
EpisodeWorkload load_workload(std::istream& in, const std::string& origin);
EpisodeWorkload load_workload_file(const std::string& path);

}  // namespace qsched
