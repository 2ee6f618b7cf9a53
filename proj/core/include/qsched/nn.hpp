#pragma once

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "qsched/rng.hpp"

namespace qsched {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { ReLU, Identity };

// Named view of one parameter tensor and its gradient slot. Biases are kept
// as (out x 1) matrices so optimizers and serialization treat everything
// uniformly.
struct ParamRef {
  std::string name;
  Matrix* value;
  Matrix* grad;
};

/// Fully connected layer, batch rows: y = act(x * W^T + b^T).
class DenseLayer {
 public:
  DenseLayer(int in, int out, Activation act, Rng& rng);

  Matrix forward(const Matrix& x, bool cache = false);
  /// Upstream gradient w.r.t. this layer's output; returns gradient w.r.t.
  /// its input and writes dw/db. Requires a cached forward pass.
  Matrix backward(const Matrix& dy);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  int in_dim() const { return static_cast<int>(w.cols()); }
  int out_dim() const { return static_cast<int>(w.rows()); }

  Matrix w, b;
  Matrix dw, db;

 private:
  Activation act_;
  Matrix in_, z_;
  bool has_cache_ = false;
};

/// Fully connected layer with factorized Gaussian parameter noise:
/// W_eff = w_mu + w_sigma . (f(eps_out) f(eps_in)^T), f(x) = sign(x)sqrt(|x|).
/// With all noise zero it is exactly DenseLayer(w_mu, b_mu).
class NoisyDenseLayer {
 public:
  NoisyDenseLayer() = default;
  NoisyDenseLayer(int in, int out, Activation act, Rng& rng);

  void resample_noise(Rng& rng);
  void zero_noise();

  Matrix forward(const Matrix& x, bool cache = false);
  Matrix backward(const Matrix& dy);

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  /// Projects sigma back onto [0, inf) after an optimizer step.
  void clamp_sigma();
  void refresh_effective();

  int in_dim() const { return static_cast<int>(w_mu.cols()); }
  int out_dim() const { return static_cast<int>(w_mu.rows()); }

  Matrix w_mu, w_sigma, b_mu, b_sigma;
  Matrix dw_mu, dw_sigma, db_mu, db_sigma;

 private:
  Activation act_ = Activation::Identity;
  Matrix w_eff_, b_eff_;
  Matrix noise_w_;  // f(eps_out) f(eps_in)^T
  Matrix noise_b_;  // f(eps_out)
  Matrix in_, z_;
  bool has_cache_ = false;
};

struct QNetConfig {
  int input_dim = 0;
  int n_actions = 0;
  int n_atoms = 10;
  double v_min = -10.0;
  double v_max = 10.0;
  std::vector<int> hidden{128, 128};
};

/// Noisy MLP mapping state rows to per-action probability distributions over
/// a fixed value support z_1..z_K. Output layout: [batch x (A*K)], action a's
/// block in columns [a*K, (a+1)*K).
class CategoricalQNet {
 public:
  CategoricalQNet(QNetConfig cfg, Rng& rng);

  /// Per-action softmax probabilities; rows of each action block sum to 1.
  Matrix forward(const Matrix& states, bool cache = false);
  /// Gradient w.r.t. the head's pre-softmax logits (the caller folds the
  /// softmax derivative into dlogits). Writes gradients on every layer.
  void backward(const Matrix& dlogits);

  /// Expected value per action from a probability matrix.
  Matrix expected_values(const Matrix& probs) const;
  /// argmax_a sum_k z_k p_k(state, a); ties break to the lowest index.
  int greedy_action(const Vector& state);

  void resample_noise(Rng& rng);
  void zero_noise();
  void clamp_sigma();
  /// Recomputes cached effective weights after direct parameter writes
  /// (optimizer steps and deserialization go through this).
  void refresh_effective();
  void copy_params_from(const CategoricalQNet& other);

  std::vector<ParamRef> params();
  const QNetConfig& config() const { return cfg_; }
  const Vector& support() const { return support_; }
  double delta_z() const;
  int output_dim() const { return cfg_.n_actions * cfg_.n_atoms; }

 private:
  QNetConfig cfg_;
  std::vector<NoisyDenseLayer> hidden_;
  NoisyDenseLayer head_;
  Vector support_;
};

/// Bias-corrected adaptive-moment optimizer over a fixed parameter list.
class AdamOptimizer {
 public:
  struct Config {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamOptimizer(Config cfg) : cfg_(cfg) {}

  /// One update step. Throws TrainingError on non-finite gradients.
  void step(const std::vector<ParamRef>& params);
  int t() const { return t_; }
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Parameter (de)serialization: {"format_version":1,"params":[...]}.
nlohmann::json params_to_json(const std::vector<ParamRef>& params);
void params_from_json(const nlohmann::json& j, const std::vector<ParamRef>& params);

}  // namespace qsched
