#include "qsched/agent.hpp"

#include <algorithm>
#include <cmath>

#include "qsched/util.hpp"

namespace qsched {

void AgentConfig::validate() const {
  if (!(v_min < v_max)) throw UsageError("AgentConfig: v_min must be < v_max");
  if (n_step < 1) throw UsageError("AgentConfig: n_step must be >= 1");
  if (batch_size < 1) throw UsageError("AgentConfig: batch_size must be >= 1");
  if (n_atoms < 2) throw UsageError("AgentConfig: n_atoms must be >= 2");
  if (discount < 0.0 || discount > 1.0) throw UsageError("AgentConfig: discount in [0,1]");
  if (replay_capacity < batch_size)
    throw UsageError("AgentConfig: replay_capacity must be >= batch_size");
  if (!(priority_floor > 0.0)) throw UsageError("AgentConfig: priority_floor must be > 0");
  if (target_sync_period < 1) throw UsageError("AgentConfig: target_sync_period >= 1");
}

Matrix project_distribution(const Matrix& next_probs, const std::vector<double>& returns,
                            const std::vector<double>& bootstrap, const Vector& support) {
  const int B = static_cast<int>(next_probs.rows());
  const int K = static_cast<int>(support.size());
  if (static_cast<int>(returns.size()) != B || static_cast<int>(bootstrap.size()) != B)
    throw UsageError("project_distribution: batch size mismatch");
  if (next_probs.cols() != K) throw UsageError("project_distribution: atom count mismatch");

  const double v_min = support[0];
  const double v_max = support[K - 1];
  const double dz = (v_max - v_min) / static_cast<double>(K - 1);

  Matrix out = Matrix::Zero(B, K);
  for (int i = 0; i < B; ++i) {
    for (int k = 0; k < K; ++k) {
      double tz = returns[static_cast<std::size_t>(i)] +
                  bootstrap[static_cast<std::size_t>(i)] * support[k];
      tz = std::clamp(tz, v_min, v_max);
      double pos = (tz - v_min) / dz;
      int lo = std::clamp(static_cast<int>(std::floor(pos)), 0, K - 1);
      int hi = std::clamp(static_cast<int>(std::ceil(pos)), 0, K - 1);
      double p = next_probs(i, k);
      if (lo == hi) {
        out(i, lo) += p;
      } else {
        out(i, lo) += p * (hi - pos);
        out(i, hi) += p * (pos - lo);
      }
    }
  }
  return out;
}

namespace {

QNetConfig make_net_config(int state_dim, int n_actions, const AgentConfig& cfg) {
  QNetConfig n;
  n.input_dim = state_dim;
  n.n_actions = n_actions;
  n.n_atoms = cfg.n_atoms;
  n.v_min = cfg.v_min;
  n.v_max = cfg.v_max;
  n.hidden = cfg.hidden;
  return n;
}

}  // namespace

RainbowAgent::RainbowAgent(int state_dim, int n_actions, AgentConfig cfg, std::uint64_t seed)
    : state_dim_(state_dim),
      n_actions_(n_actions),
      cfg_(cfg),
      rng_(derive_seed(seed, SeedStream::AgentNoise)),
      online_(make_net_config(state_dim, n_actions, cfg), rng_),
      target_(make_net_config(state_dim, n_actions, cfg), rng_),
      opt_(AdamOptimizer::Config{cfg.lr, 0.9, 0.999, 1e-8}),
      replay_(cfg.replay_capacity, cfg.per_alpha) {
  cfg_.validate();
  target_.zero_noise();
}

int RainbowAgent::act(const Eigen::VectorXd& state) {
  return online_.greedy_action(state);
}

void RainbowAgent::begin_episode() {
  if (episode_active_) end_episode();
  episode_active_ = true;
}

void RainbowAgent::observe(const Eigen::VectorXd& s, int action, double reward,
                           const Eigen::VectorXd& s2, bool done) {
  if (!episode_active_) throw UsageError("observe: no active episode");
  stage_.push_back(RawStep{s, s2, action, reward, done});
  if (static_cast<int>(stage_.size()) == cfg_.n_step) {
    emit_front(cfg_.n_step);
    stage_.pop_front();
  }
}

void RainbowAgent::end_episode() {
  while (!stage_.empty()) {
    emit_front(static_cast<int>(stage_.size()));
    stage_.pop_front();
  }
  episode_active_ = false;
}

void RainbowAgent::emit_front(int len) {
  Transition t;
  t.s = stage_.front().s;
  t.action = stage_.front().action;
  double r = 0.0;
  double g = 1.0;
  for (int i = 0; i < len; ++i) {
    r += g * stage_[static_cast<std::size_t>(i)].reward;
    g *= cfg_.discount;
  }
  t.reward = r;
  const RawStep& last = stage_[static_cast<std::size_t>(len - 1)];
  t.s2 = last.s2;
  t.done = last.done;
  t.n_used = len;
  replay_.push(std::move(t));
}

bool RainbowAgent::ready_to_learn() const {
  return replay_.size() >= std::max(cfg_.batch_size, cfg_.warmup);
}

double RainbowAgent::current_beta() const {
  if (cfg_.per_beta_anneal_steps <= 0) return cfg_.per_beta1;
  double frac = std::min(1.0, static_cast<double>(learn_steps_) /
                                  static_cast<double>(cfg_.per_beta_anneal_steps));
  return cfg_.per_beta0 + (cfg_.per_beta1 - cfg_.per_beta0) * frac;
}

Matrix RainbowAgent::project_target(const std::vector<const Transition*>& batch) {
  if (!target_synced_) throw UsageError("project_target: target net never synced");
  const int B = static_cast<int>(batch.size());
  const int K = cfg_.n_atoms;

  Matrix s2(B, state_dim_);
  std::vector<double> returns(static_cast<std::size_t>(B));
  std::vector<double> bootstrap(static_cast<std::size_t>(B));
  for (int i = 0; i < B; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    s2.row(i) = t.s2.transpose();
    returns[static_cast<std::size_t>(i)] = t.reward;
    bootstrap[static_cast<std::size_t>(i)] =
        t.done ? 0.0 : std::pow(cfg_.discount, t.n_used);
  }

  // Double DQN: the online net picks a*, the target net evaluates it.
  Matrix online_probs = online_.forward(s2, false);
  Matrix online_q = online_.expected_values(online_probs);
  Matrix target_probs = target_.forward(s2, false);

  Matrix next_dist(B, K);
  for (int i = 0; i < B; ++i) {
    int best = 0;
    for (int a = 1; a < n_actions_; ++a)
      if (online_q(i, a) > online_q(i, best)) best = a;
    next_dist.row(i) = target_probs.block(i, best * K, 1, K);
  }
  return project_distribution(next_dist, returns, bootstrap, online_.support());
}

double RainbowAgent::learn() {
  if (!target_synced_) throw UsageError("learn: sync_target() must run first");
  if (replay_.size() < cfg_.batch_size)
    throw UsageError("learn: replay buffer is underfull");

  online_.resample_noise(rng_);

  PrioritizedReplay::Batch batch = replay_.sample(cfg_.batch_size, current_beta(), rng_);
  const int B = cfg_.batch_size;
  const int K = cfg_.n_atoms;

  std::vector<const Transition*> items;
  items.reserve(static_cast<std::size_t>(B));
  for (int idx : batch.indices) items.push_back(&replay_.at(idx));

  Matrix target_dist = project_target(items);

  Matrix s(B, state_dim_);
  for (int i = 0; i < B; ++i) s.row(i) = items[static_cast<std::size_t>(i)]->s.transpose();
  Matrix probs = online_.forward(s, true);

  // IS-weighted cross-entropy between projected targets and the online
  // distribution at the taken action.
  Matrix dlogits = Matrix::Zero(B, online_.output_dim());
  std::vector<double> sample_loss(static_cast<std::size_t>(B));
  double loss = 0.0;
  for (int i = 0; i < B; ++i) {
    int a = items[static_cast<std::size_t>(i)]->action;
    double ce = 0.0;
    for (int k = 0; k < K; ++k) {
      double p = std::max(probs(i, a * K + k), 1e-12);
      ce -= target_dist(i, k) * std::log(p);
    }
    sample_loss[static_cast<std::size_t>(i)] = ce;
    double w = batch.is_weights[static_cast<std::size_t>(i)];
    loss += w * ce / static_cast<double>(B);
    for (int k = 0; k < K; ++k)
      dlogits(i, a * K + k) =
          (probs(i, a * K + k) - target_dist(i, k)) * w / static_cast<double>(B);
  }
  if (!std::isfinite(loss)) throw TrainingError("non-finite loss in learn()");

  online_.backward(dlogits);
  opt_.step(online_.params());
  online_.clamp_sigma();

  for (int i = 0; i < B; ++i)
    replay_.update_priority(batch.indices[static_cast<std::size_t>(i)],
                            sample_loss[static_cast<std::size_t>(i)] + cfg_.priority_floor);

  learn_steps_ += 1;
  return loss;
}

void RainbowAgent::sync_target() {
  target_.copy_params_from(online_);
  target_.zero_noise();
  target_synced_ = true;
  sync_count_ += 1;
}

void RainbowAgent::resample_noise() { online_.resample_noise(rng_); }

void RainbowAgent::zero_noise() { online_.zero_noise(); }

}  // namespace qsched
