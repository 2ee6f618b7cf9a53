#include "qsched/replay.hpp"

#include <algorithm>
#include <cmath>

#include "qsched/util.hpp"

namespace qsched {

SumTree::SumTree(int capacity) : cap_(capacity) {
  if (capacity < 1) throw UsageError("SumTree: capacity must be >= 1");
  base_ = 1;
  while (base_ < cap_) base_ *= 2;
  tree_.assign(static_cast<std::size_t>(2 * base_), 0.0);
}

void SumTree::set(int index, double value) {
  if (index < 0 || index >= cap_) throw UsageError("SumTree::set: index out of range");
  int i = base_ + index;
  tree_[static_cast<std::size_t>(i)] = value;
  for (i /= 2; i >= 1; i /= 2)
    tree_[static_cast<std::size_t>(i)] =
        tree_[static_cast<std::size_t>(2 * i)] + tree_[static_cast<std::size_t>(2 * i + 1)];
}

double SumTree::get(int index) const {
  if (index < 0 || index >= cap_) throw UsageError("SumTree::get: index out of range");
  return tree_[static_cast<std::size_t>(base_ + index)];
}

double SumTree::total() const { return tree_[1]; }

int SumTree::find_prefix(double mass) const {
  int i = 1;
  while (i < base_) {
    double left = tree_[static_cast<std::size_t>(2 * i)];
    if (mass < left) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - base_, cap_ - 1);
}

PrioritizedReplay::PrioritizedReplay(int capacity, double alpha)
    : capacity_(capacity), alpha_(alpha), tree_(capacity) {
  if (capacity < 1) throw UsageError("PrioritizedReplay: capacity must be >= 1");
  if (alpha < 0.0) throw UsageError("PrioritizedReplay: alpha must be >= 0");
  data_.resize(static_cast<std::size_t>(capacity));
}

void PrioritizedReplay::push(Transition t) {
  data_[static_cast<std::size_t>(next_)] = std::move(t);
  tree_.set(next_, std::pow(max_priority_, alpha_));
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& PrioritizedReplay::at(int index) const {
  if (index < 0 || index >= size_) throw UsageError("PrioritizedReplay::at: index out of range");
  return data_[static_cast<std::size_t>(index)];
}

PrioritizedReplay::Batch PrioritizedReplay::sample(int batch, double beta, Rng& rng) const {
  if (batch < 1) throw UsageError("sample: batch must be >= 1");
  if (size_ < batch)
    throw UsageError("sample: buffer holds " + std::to_string(size_) + " < batch " +
                     std::to_string(batch));
  double total = tree_.total();
  if (!(total > 0.0)) throw UsageError("sample: total priority mass is zero");

  Batch out;
  out.indices.reserve(static_cast<std::size_t>(batch));
  out.is_weights.reserve(static_cast<std::size_t>(batch));
  double n = static_cast<double>(size_);
  double w_max = 0.0;
  for (int i = 0; i < batch; ++i) {
    int idx = tree_.find_prefix(rng.uniform() * total);
    if (idx >= size_) idx = size_ - 1;  // zero-mass tail is unreachable; be safe
    double p = tree_.get(idx) / total;
    double w = std::pow(n * p, -beta);
    out.indices.push_back(idx);
    out.is_weights.push_back(w);
    w_max = std::max(w_max, w);
  }
  for (double& w : out.is_weights) w /= w_max;
  return out;
}

void PrioritizedReplay::update_priority(int index, double priority) {
  if (index < 0 || index >= size_)
    throw UsageError("update_priority: index out of range");
  if (!(priority > 0.0)) throw UsageError("update_priority: priority must be > 0");
  tree_.set(index, std::pow(priority, alpha_));
  max_priority_ = std::max(max_priority_, priority);
}

double PrioritizedReplay::probability(int index) const {
  if (index < 0 || index >= size_) throw UsageError("probability: index out of range");
  return tree_.get(index) / tree_.total();
}

}  // namespace qsched
