#include "qsched/nn.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "qsched/util.hpp"

namespace qsched {

namespace {

Matrix uniform_init(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

Matrix apply_activation(const Matrix& z, Activation act) {
  if (act == Activation::Identity) return z;
  return z.cwiseMax(0.0);
}

Matrix activation_grad(const Matrix& dy, const Matrix& z, Activation act) {
  if (act == Activation::Identity) return dy;
  return (z.array() > 0.0).select(dy, Matrix::Zero(dy.rows(), dy.cols()));
}

double signed_sqrt(double x) { return (x < 0.0 ? -1.0 : 1.0) * std::sqrt(std::abs(x)); }

}  // namespace

DenseLayer::DenseLayer(int in, int out, Activation act, Rng& rng) : act_(act) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w = uniform_init(out, in, bound, rng);
  b = uniform_init(out, 1, bound, rng);
  dw = Matrix::Zero(out, in);
  db = Matrix::Zero(out, 1);
}

Matrix DenseLayer::forward(const Matrix& x, bool cache) {
  if (x.cols() != w.cols()) throw UsageError("DenseLayer::forward: input width mismatch");
  Matrix z = (x * w.transpose()).rowwise() + b.col(0).transpose();
  if (cache) {
    in_ = x;
    z_ = z;
    has_cache_ = true;
  }
  return apply_activation(z, act_);
}

Matrix DenseLayer::backward(const Matrix& dy) {
  if (!has_cache_) throw UsageError("DenseLayer::backward called before cached forward");
  Matrix dz = activation_grad(dy, z_, act_);
  dw = dz.transpose() * in_;
  db = dz.colwise().sum().transpose();
  return dz * w;
}

void DenseLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w, &dw});
  out.push_back({prefix + ".b", &b, &db});
}

NoisyDenseLayer::NoisyDenseLayer(int in, int out, Activation act, Rng& rng) : act_(act) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w_mu = uniform_init(out, in, bound, rng);
  b_mu = uniform_init(out, 1, bound, rng);
  w_sigma = Matrix::Constant(out, in, 0.5 * bound);
  b_sigma = Matrix::Constant(out, 1, 0.5 * bound);
  dw_mu = Matrix::Zero(out, in);
  dw_sigma = Matrix::Zero(out, in);
  db_mu = Matrix::Zero(out, 1);
  db_sigma = Matrix::Zero(out, 1);
  noise_w_ = Matrix::Zero(out, in);
  noise_b_ = Matrix::Zero(out, 1);
  refresh_effective();
}

void NoisyDenseLayer::resample_noise(Rng& rng) {
  int in = in_dim(), out = out_dim();
  Vector f_in(in), f_out(out);
  for (int i = 0; i < in; ++i) f_in[i] = signed_sqrt(rng.normal());
  for (int o = 0; o < out; ++o) f_out[o] = signed_sqrt(rng.normal());
  noise_w_ = f_out * f_in.transpose();
  noise_b_ = f_out;
  refresh_effective();
}

void NoisyDenseLayer::zero_noise() {
  noise_w_.setZero();
  noise_b_.setZero();
  refresh_effective();
}

void NoisyDenseLayer::refresh_effective() {
  w_eff_ = w_mu + w_sigma.cwiseProduct(noise_w_);
  b_eff_ = b_mu + b_sigma.cwiseProduct(noise_b_);
}

Matrix NoisyDenseLayer::forward(const Matrix& x, bool cache) {
  if (x.cols() != w_mu.cols())
    throw UsageError("NoisyDenseLayer::forward: input width mismatch");
  Matrix z = (x * w_eff_.transpose()).rowwise() + b_eff_.col(0).transpose();
  if (cache) {
    in_ = x;
    z_ = z;
    has_cache_ = true;
  }
  return apply_activation(z, act_);
}

Matrix NoisyDenseLayer::backward(const Matrix& dy) {
  if (!has_cache_) throw UsageError("NoisyDenseLayer::backward called before cached forward");
  Matrix dz = activation_grad(dy, z_, act_);
  Matrix dw_eff = dz.transpose() * in_;
  Matrix db_eff = dz.colwise().sum().transpose();
  dw_mu = dw_eff;
  dw_sigma = dw_eff.cwiseProduct(noise_w_);
  db_mu = db_eff;
  db_sigma = db_eff.cwiseProduct(noise_b_);
  return dz * w_eff_;
}

void NoisyDenseLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w_mu", &w_mu, &dw_mu});
  out.push_back({prefix + ".w_sigma", &w_sigma, &dw_sigma});
  out.push_back({prefix + ".b_mu", &b_mu, &db_mu});
  out.push_back({prefix + ".b_sigma", &b_sigma, &db_sigma});
}

void NoisyDenseLayer::clamp_sigma() {
  w_sigma = w_sigma.cwiseMax(0.0);
  b_sigma = b_sigma.cwiseMax(0.0);
  refresh_effective();
}

CategoricalQNet::CategoricalQNet(QNetConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.input_dim < 1 || cfg_.n_actions < 1)
    throw UsageError("CategoricalQNet: bad dimensions");
  if (cfg_.n_atoms < 2) throw UsageError("CategoricalQNet: need at least 2 atoms");
  if (!(cfg_.v_min < cfg_.v_max)) throw UsageError("CategoricalQNet: v_min must be < v_max");

  int in = cfg_.input_dim;
  for (int width : cfg_.hidden) {
    hidden_.emplace_back(in, width, Activation::ReLU, rng);
    in = width;
  }
  head_ = NoisyDenseLayer(in, cfg_.n_actions * cfg_.n_atoms, Activation::Identity, rng);

  support_ = Vector::LinSpaced(cfg_.n_atoms, cfg_.v_min, cfg_.v_max);
}

double CategoricalQNet::delta_z() const {
  return (cfg_.v_max - cfg_.v_min) / static_cast<double>(cfg_.n_atoms - 1);
}

Matrix CategoricalQNet::forward(const Matrix& states, bool cache) {
  if (states.cols() != cfg_.input_dim)
    throw UsageError("CategoricalQNet::forward: input width mismatch");
  Matrix h = states;
  for (auto& layer : hidden_) h = layer.forward(h, cache);
  Matrix logits = head_.forward(h, cache);

  // Per-action softmax over each K-atom block, max-shifted for stability.
  Matrix probs(logits.rows(), logits.cols());
  int K = cfg_.n_atoms;
  for (int a = 0; a < cfg_.n_actions; ++a) {
    auto block = logits.middleCols(a * K, K);
    Vector row_max = block.rowwise().maxCoeff();
    Matrix e = (block.colwise() - row_max).array().exp();
    Vector sums = e.rowwise().sum();
    probs.middleCols(a * K, K) = e.array().colwise() / sums.array();
  }
  return probs;
}

void CategoricalQNet::backward(const Matrix& dlogits) {
  if (dlogits.cols() != output_dim())
    throw UsageError("CategoricalQNet::backward: gradient width mismatch");
  Matrix g = head_.backward(dlogits);
  for (auto it = hidden_.rbegin(); it != hidden_.rend(); ++it) g = it->backward(g);
}

Matrix CategoricalQNet::expected_values(const Matrix& probs) const {
  int K = cfg_.n_atoms;
  Matrix q(probs.rows(), cfg_.n_actions);
  for (int a = 0; a < cfg_.n_actions; ++a) q.col(a) = probs.middleCols(a * K, K) * support_;
  return q;
}

int CategoricalQNet::greedy_action(const Vector& state) {
  Matrix probs = forward(state.transpose(), false);
  Matrix q = expected_values(probs);
  int best = 0;
  for (int a = 1; a < cfg_.n_actions; ++a)
    if (q(0, a) > q(0, best)) best = a;
  return best;
}

void CategoricalQNet::resample_noise(Rng& rng) {
  for (auto& l : hidden_) l.resample_noise(rng);
  head_.resample_noise(rng);
}

void CategoricalQNet::zero_noise() {
  for (auto& l : hidden_) l.zero_noise();
  head_.zero_noise();
}

void CategoricalQNet::clamp_sigma() {
  for (auto& l : hidden_) l.clamp_sigma();
  head_.clamp_sigma();
}

void CategoricalQNet::refresh_effective() {
  for (auto& l : hidden_) l.refresh_effective();
  head_.refresh_effective();
}

void CategoricalQNet::copy_params_from(const CategoricalQNet& other) {
  if (other.cfg_.input_dim != cfg_.input_dim || other.cfg_.hidden != cfg_.hidden ||
      other.cfg_.n_actions != cfg_.n_actions || other.cfg_.n_atoms != cfg_.n_atoms)
    throw UsageError("copy_params_from: architecture mismatch");
  for (std::size_t i = 0; i < hidden_.size(); ++i) {
    hidden_[i].w_mu = other.hidden_[i].w_mu;
    hidden_[i].w_sigma = other.hidden_[i].w_sigma;
    hidden_[i].b_mu = other.hidden_[i].b_mu;
    hidden_[i].b_sigma = other.hidden_[i].b_sigma;
    hidden_[i].refresh_effective();
  }
  head_.w_mu = other.head_.w_mu;
  head_.w_sigma = other.head_.w_sigma;
  head_.b_mu = other.head_.b_mu;
  head_.b_sigma = other.head_.b_sigma;
  head_.refresh_effective();
}

std::vector<ParamRef> CategoricalQNet::params() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < hidden_.size(); ++i)
    hidden_[i].collect_params("h" + std::to_string(i), out);
  head_.collect_params("head", out);
  return out;
}

void AdamOptimizer::step(const std::vector<ParamRef>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    }
  }
  if (m_.size() != params.size()) throw UsageError("AdamOptimizer: parameter list changed");

  for (const auto& p : params)
    if (!p.grad->allFinite())
      throw TrainingError("non-finite gradient in parameter " + p.name);

  t_ += 1;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *params[i].grad;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix m_hat = m_[i] / bc1;
    Matrix v_hat = v_[i] / bc2;
    *params[i].value -=
        cfg_.lr * (m_hat.array() / (v_hat.array().sqrt() + cfg_.eps)).matrix();
  }
}

nlohmann::json params_to_json(const std::vector<ParamRef>& params) {
  nlohmann::json j;
  j["format_version"] = 1;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : params) {
    nlohmann::json t;
    t["name"] = p.name;
    t["rows"] = p.value->rows();
    t["cols"] = p.value->cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p.value->size()));
    for (Eigen::Index r = 0; r < p.value->rows(); ++r)
      for (Eigen::Index c = 0; c < p.value->cols(); ++c) data.push_back((*p.value)(r, c));
    t["data"] = std::move(data);
    arr.push_back(std::move(t));
  }
  j["params"] = std::move(arr);
  return j;
}

void params_from_json(const nlohmann::json& j, const std::vector<ParamRef>& params) {
  if (j.value("format_version", -1) != 1)
    throw ParseError("unsupported parameter format_version");
  const auto& arr = j.at("params");
  if (arr.size() != params.size())
    throw ParseError("parameter count mismatch: file has " + std::to_string(arr.size()) +
                     ", net has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = arr[i];
    if (t.at("name").get<std::string>() != params[i].name)
      throw ParseError("parameter name mismatch at index " + std::to_string(i));
    Eigen::Index rows = t.at("rows").get<Eigen::Index>();
    Eigen::Index cols = t.at("cols").get<Eigen::Index>();
    if (rows != params[i].value->rows() || cols != params[i].value->cols())
      throw ParseError("parameter shape mismatch for " + params[i].name);
    const auto& data = t.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw ParseError("parameter data size mismatch for " + params[i].name);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) (*params[i].value)(r, c) = data[k++].get<double>();
  }
}

}  // namespace qsched
