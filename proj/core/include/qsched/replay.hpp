#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "qsched/rng.hpp"

namespace qsched {

/// One (possibly n-step aggregated) MDP transition.
struct Transition {
  Eigen::VectorXd s;
  int action = -1;
  double reward = 0.0;      // aggregated n-step return
  Eigen::VectorXd s2;
  bool done = false;        // task terminality of the last raw step
  int n_used = 1;           // raw steps folded into reward
};

/// Array-backed binary prefix-sum tree over a fixed number of slots.
class SumTree {
 public:
  explicit SumTree(int capacity);

  void set(int index, double value);
  double get(int index) const;
  double total() const;
  /// Leaf index i such that prefix mass falls inside slot i. `mass` must be
  /// in [0, total()).
  int find_prefix(double mass) const;
  int capacity() const { return cap_; }

 private:
  int cap_;
  int base_;  // leaves live at [base_, base_ + cap_)
  std::vector<double> tree_;
};

/// Proportional prioritized replay: P(i) = p_i^alpha / sum_j p_j^alpha.
/// New items enter with the maximum raw priority seen so far so they are
/// sampled promptly.
class PrioritizedReplay {
 public:
  PrioritizedReplay(int capacity, double alpha);

  void push(Transition t);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  const Transition& at(int index) const;

  struct Batch {
    std::vector<int> indices;
    std::vector<double> is_weights;  // normalized by the batch max
  };
  /// Proportional sampling of `batch` indices plus importance weights
  /// w_i = (N * P(i))^(-beta) / max_batch w. Throws on an underfull buffer.
  Batch sample(int batch, double beta, Rng& rng) const;

  /// Raw (pre-alpha) priority update; must be > 0.
  void update_priority(int index, double priority);
  double max_priority() const { return max_priority_; }
  /// Current sampling probability of one slot (diagnostics/tests).
  double probability(int index) const;

 private:
  int capacity_;
  double alpha_;
  SumTree tree_;
  std::vector<Transition> data_;
  int next_ = 0;
  int size_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace qsched
