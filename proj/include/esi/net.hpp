#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "esi/rng.hpp"
#include "esi/types.hpp"

namespace esi::net {

enum class Activation { kTanh, kRelu };

inline std::string to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + s + "' (expected tanh or relu)");
}

struct TrainerConfig {
  int batch_size = 15;          // K
  double learning_rate = 0.005;  // eta
  int train_iters = 200;        // T
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainerConfig: batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("TrainerConfig: learning_rate must be finite and >= 0");
    if (train_iters < 0) throw std::invalid_argument("TrainerConfig: train_iters must be >= 0");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("TrainerConfig: init_scale must be >= 0");
  }

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

// Single-hidden-layer perceptron: a = W2 * act(W1 * s + b1) + b2.
struct MlpPolicy {
  Matrix w1;  // hidden x input
  Vector b1;
  Matrix w2;  // output x hidden
  Vector b2;
  Activation activation = Activation::kTanh;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int output_dim() const { return static_cast<int>(w2.rows()); }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(hidden_dim()) * (input_dim() + 1) +
           static_cast<std::size_t>(output_dim()) * (hidden_dim() + 1);
  }

  bool all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
  }

  friend bool operator==(const MlpPolicy& a, const MlpPolicy& b) {
    return a.activation == b.activation && a.w1.rows() == b.w1.rows() &&
           a.w1.cols() == b.w1.cols() && a.w2.rows() == b.w2.rows() && a.w1 == b.w1 &&
           a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
  }
};

// Gradient of the minibatch loss, same layout as the policy parameters.
struct Gradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double activate(Activation a, double x) {
  return a == Activation::kTanh ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

// Derivative expressed in terms of the activation output h.
inline double activate_grad(Activation a, double h) {
  return a == Activation::kTanh ? 1.0 - h * h : (h > 0.0 ? 1.0 : 0.0);
}

inline void check_sample(const MlpPolicy& p, const Sample& s) {
  if (s.state.size() != p.input_dim() || s.action.size() != p.output_dim()) {
    std::ostringstream os;
    os << "sample shape (" << s.state.size() << " -> " << s.action.size()
       << ") does not match policy (" << p.input_dim() << " -> " << p.output_dim() << ")";
    throw DimensionError(os.str());
  }
}

}  // namespace detail

inline MlpPolicy init_policy(int input_dim, int hidden_dim, int output_dim, const TrainerConfig& config,
                             Activation activation = Activation::kTanh) {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
    throw std::invalid_argument("init_policy: all dimensions must be >= 1");
  MlpPolicy p;
  p.activation = activation;
  p.w1 = Matrix::Zero(hidden_dim, input_dim);
  p.b1 = Vector::Zero(hidden_dim);
  p.w2 = Matrix::Zero(output_dim, hidden_dim);
  p.b2 = Vector::Zero(output_dim);
  if (config.init_scale > 0.0) {
    Rng rng(config.seed);
    std::normal_distribution<double> normal(0.0, config.init_scale);
    for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = normal(rng);
  }
  return p;
}

inline Vector forward(const MlpPolicy& p, const Vector& state) {
  if (state.size() != p.input_dim()) {
    throw DimensionError("forward: state has length " + std::to_string(state.size()) +
                         ", policy expects " + std::to_string(p.input_dim()));
  }
  Vector h = p.w1 * state + p.b1;
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = detail::activate(p.activation, h[i]);
  return p.w2 * h + p.b2;
}

// Sum over samples of the squared Euclidean action error.
inline double imitation_loss(const MlpPolicy& p, std::span<const Sample> data) {
  if (data.empty()) throw std::invalid_argument("imitation_loss: empty data");
  double total = 0.0;
  for (const Sample& s : data) {
    detail::check_sample(p, s);
    total += (forward(p, s.state) - s.action).squaredNorm();
  }
  return total;
}

// Reusable buffers for batched forward/backward passes.
class Workspace {
 public:
  Workspace(const MlpPolicy& p, int batch) { resize(p, batch); }

  void resize(const MlpPolicy& p, int batch) {
    x_.resize(batch, p.input_dim());
    a_.resize(batch, p.output_dim());
    h_.resize(batch, p.hidden_dim());
    y_.resize(batch, p.output_dim());
    dh_.resize(batch, p.hidden_dim());
    grad_.w1.resize(p.hidden_dim(), p.input_dim());
    grad_.b1.resize(p.hidden_dim());
    grad_.w2.resize(p.output_dim(), p.hidden_dim());
    grad_.b2.resize(p.output_dim());
  }

  // Mean (over the batch) squared action error and its gradient for the
  // samples data[indices[k]].
  double loss_and_gradient(const MlpPolicy& p, std::span<const Sample> data,
                           std::span<const std::size_t> indices) {
    const auto batch = static_cast<Eigen::Index>(indices.size());
    if (x_.rows() != batch) resize(p, static_cast<int>(batch));
    for (Eigen::Index k = 0; k < batch; ++k) {
      const Sample& s = data[indices[static_cast<std::size_t>(k)]];
      x_.row(k) = s.state.transpose();
      a_.row(k) = s.action.transpose();
    }
    h_.noalias() = x_ * p.w1.transpose();
    h_.rowwise() += p.b1.transpose();
    for (Eigen::Index i = 0; i < h_.size(); ++i) h_.data()[i] = detail::activate(p.activation, h_.data()[i]);
    y_.noalias() = h_ * p.w2.transpose();
    y_.rowwise() += p.b2.transpose();
    y_ -= a_;  // residual
    const double loss = y_.squaredNorm() / static_cast<double>(batch);

    y_ *= 2.0 / static_cast<double>(batch);  // dL/dy
    grad_.w2.noalias() = y_.transpose() * h_;
    grad_.b2 = y_.colwise().sum().transpose();
    dh_.noalias() = y_ * p.w2;
    for (Eigen::Index i = 0; i < dh_.size(); ++i)
      dh_.data()[i] *= detail::activate_grad(p.activation, h_.data()[i]);
    grad_.w1.noalias() = dh_.transpose() * x_;
    grad_.b1 = dh_.colwise().sum().transpose();
    return loss;
  }

  const Gradients& gradients() const { return grad_; }

 private:
  Matrix x_, a_, h_, y_, dh_;
  Gradients grad_;
};

// Mean squared action error over the whole data set with its gradient.
inline std::pair<double, Gradients> loss_gradient(const MlpPolicy& p, std::span<const Sample> data) {
  if (data.empty()) throw std::invalid_argument("loss_gradient: empty data");
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    detail::check_sample(p, data[i]);
    idx[i] = i;
  }
  Workspace ws(p, static_cast<int>(idx.size()));
  double loss = ws.loss_and_gradient(p, data, idx);
  return {loss, ws.gradients()};
}

inline void sgd_step(MlpPolicy& p, const Gradients& g, double learning_rate) {
  p.w1 -= learning_rate * g.w1;
  p.b1 -= learning_rate * g.b1;
  p.w2 -= learning_rate * g.w2;
  p.b2 -= learning_rate * g.b2;
}

// Plain minibatch SGD: train_iters steps, each on batch_size samples drawn
// uniformly with replacement.
inline MlpPolicy train(MlpPolicy policy, std::span<const Sample> data, const TrainerConfig& config) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train: empty data");
  for (const Sample& s : data) detail::check_sample(policy, s);

  Rng rng(derive_seed(config.seed, {stream::kMinibatch}));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<std::size_t> batch(static_cast<std::size_t>(config.batch_size));
  Workspace ws(policy, config.batch_size);

  for (int step = 0; step < config.train_iters; ++step) {
    for (auto& i : batch) i = pick(rng);
    const double loss = ws.loss_and_gradient(policy, data, batch);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "training diverged: non-finite loss at step " << step << " (learning_rate=" << config.learning_rate
         << "); lower the learning rate";
      throw TrainingDiverged(os.str());
    }
    sgd_step(policy, ws.gradients(), config.learning_rate);
  }
  if (!policy.all_finite()) {
    std::ostringstream os;
    os << "training diverged: non-finite weights after " << config.train_iters
       << " steps (learning_rate=" << config.learning_rate << ")";
    throw TrainingDiverged(os.str());
  }
  return policy;
}

// ---------------------------------------------------------------------------
// Serialization: {dims, activation, w1, b1, w2, b2}, matrices row-major.

namespace detail {

inline std::vector<double> flatten(const Matrix& m) { return {m.data(), m.data() + m.size()}; }
inline std::vector<double> flatten(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Matrix unflatten(const std::vector<double>& xs, int rows, int cols, const char* what) {
  if (xs.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
    throw std::invalid_argument(std::string("policy json: wrong element count for ") + what);
  Matrix m(rows, cols);
  std::copy(xs.begin(), xs.end(), m.data());
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const MlpPolicy& p) {
  return {{"dims", {p.input_dim(), p.hidden_dim(), p.output_dim()}},
          {"activation", to_string(p.activation)},
          {"w1", detail::flatten(p.w1)},
          {"b1", detail::flatten(p.b1)},
          {"w2", detail::flatten(p.w2)},
          {"b2", detail::flatten(p.b2)}};
}

inline MlpPolicy policy_from_json(const nlohmann::json& j) {
  const auto dims = j.at("dims").get<std::vector<int>>();
  if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
    throw std::invalid_argument("policy json: dims must be three positive integers");
  MlpPolicy p;
  p.activation = activation_from_string(j.at("activation").get<std::string>());
  p.w1 = detail::unflatten(j.at("w1").get<std::vector<double>>(), dims[1], dims[0], "w1");
  p.b1 = detail::unflatten(j.at("b1").get<std::vector<double>>(), dims[1], 1, "b1");
  p.w2 = detail::unflatten(j.at("w2").get<std::vector<double>>(), dims[2], dims[1], "w2");
  p.b2 = detail::unflatten(j.at("b2").get<std::vector<double>>(), dims[2], 1, "b2");
  if (!p.all_finite()) throw std::invalid_argument("policy json: non-finite weight");
  return p;
}

}  // namespace esi::net
