#pragma once

// Small fully connected classifier: ReLU hidden layers, identity output,
// weighted cross-entropy with exact backprop, and an Adam optimizer with
// decoupled weight decay and step learning-rate decay.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "giw/errors.hpp"

namespace giw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One affine map; `weight` is out x in.
struct Layer {
  Matrix weight;
  Vector bias;
};

/// Parameters and gradients share this layout.
using Parameters = std::vector<Layer>;

inline Parameters zeros_like(const Parameters& p) {
  Parameters z;
  z.reserve(p.size());
  for (const auto& l : p) {
    z.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return z;
}

inline double max_abs_difference(const Parameters& a, const Parameters& b) {
  if (a.size() != b.size()) throw ShapeError("parameter sets differ in depth");
  double m = 0.0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weight.rows() != b[l].weight.rows() || a[l].weight.cols() != b[l].weight.cols())
      throw ShapeError("parameter sets differ in shape");
    m = std::max(m, (a[l].weight - b[l].weight).cwiseAbs().maxCoeff());
    m = std::max(m, (a[l].bias - b[l].bias).cwiseAbs().maxCoeff());
  }
  return m;
}

inline bool all_finite(const Parameters& p) {
  return std::all_of(p.begin(), p.end(),
                     [](const Layer& l) { return l.weight.allFinite() && l.bias.allFinite(); });
}

class Mlp {
 public:
  Mlp() = default;

  /// Zero-initialized network with the given layer widths (input, hidden..., classes).
  explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) throw ShapeError("an Mlp needs at least input and output widths");
    for (int d : dims_) {
      if (d <= 0) throw ShapeError("layer widths must be positive");
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      layers_.push_back({Matrix::Zero(dims_[l + 1], dims_[l]), Vector::Zero(dims_[l + 1])});
    }
  }

  /// He-normal weights, zero biases.
  static Mlp he_init(std::vector<int> dims, std::uint64_t seed) {
    Mlp net(std::move(dims));
    std::mt19937_64 rng(seed);
    for (auto& layer : net.layers_) {
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(layer.weight.cols())));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = normal(rng);
      }
    }
    return net;
  }

  const std::vector<int>& dims() const noexcept { return dims_; }
  int input_dim() const noexcept { return dims_.front(); }
  int num_classes() const noexcept { return dims_.back(); }
  std::size_t depth() const noexcept { return layers_.size(); }

  Parameters& params() noexcept { return layers_; }
  const Parameters& params() const noexcept { return layers_; }

  std::size_t num_parameters() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Fixed (untrained) shift subtracted from every input row; empty means none.
  const Vector& input_offset() const noexcept { return input_offset_; }
  void set_input_offset(Vector offset) {
    if (offset.size() != 0 && offset.size() != input_dim()) throw ShapeError("input offset width mismatch");
    input_offset_ = std::move(offset);
  }
  Matrix shift_inputs(const Matrix& batch) const {
    if (input_offset_.size() == 0) return batch;
    return batch.rowwise() - input_offset_.transpose();
  }

  /// Logits for every row of `batch`.
  Matrix operator()(const Matrix& batch) const;

 private:
  std::vector<int> dims_;
  Parameters layers_;
  Vector input_offset_;
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // activation entering each layer
  std::vector<Matrix> pre;     // pre-activation leaving each layer
};

inline Matrix forward(const Mlp& model, const Matrix& batch, ForwardCache* cache = nullptr) {
  if (batch.cols() != model.input_dim()) {
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                     std::to_string(model.input_dim()));
  }
  const auto& layers = model.params();
  Matrix a = model.shift_inputs(batch);
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = a * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    if (l + 1 < layers.size()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

inline Matrix Mlp::operator()(const Matrix& batch) const { return forward(*this, batch); }

/// Output of the last hidden layer (after ReLU); the input itself for a net without hidden layers.
inline Matrix hidden_features(const Mlp& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim()) throw ShapeError("batch width does not match model input");
  const auto& layers = model.params();
  Matrix a = model.shift_inputs(batch);
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    Matrix z = a * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    a = z.cwiseMax(0.0);
  }
  return a;
}

inline Matrix normalize_rows(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
  return m;
}

inline void check_labels(std::span<const int> labels, Eigen::Index rows, int num_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw ShapeError("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

/// Per-example cross-entropy computed through log-sum-exp.
inline Vector cross_entropy(const Matrix& logits, std::span<const int> labels) {
  check_labels(labels, logits.rows(), static_cast<int>(logits.cols()));
  Vector out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out(i) = lse - logits(i, labels[i]);
  }
  return out;
}

inline Matrix softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

inline std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

struct LossAndGradient {
  double loss = 0.0;
  Vector per_example;  // unweighted cross-entropy of each row
  Parameters gradient;
};

/// Loss = sum_i coeff_i * CE_i, with its exact gradient.
inline LossAndGradient coefficient_loss(const Mlp& model, const Matrix& batch, std::span<const int> labels,
                                        const Vector& coeffs) {
  if (coeffs.size() != batch.rows()) throw ShapeError("one coefficient per example required");
  ForwardCache cache;
  const Matrix logits = forward(model, batch, &cache);
  LossAndGradient out;
  out.per_example = cross_entropy(logits, labels);
  out.loss = coeffs.dot(out.per_example);

  Matrix delta = softmax(logits);
  for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, labels[i]) -= 1.0;
  delta.array().colwise() *= coeffs.array();

  const auto& layers = model.params();
  out.gradient = zeros_like(layers);
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.gradient[l].weight = delta.transpose() * cache.inputs[l];
    out.gradient[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Matrix back = delta * layers[l].weight;
      delta = back.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

/// (1/n) sum_i w_i * CE_i and its parameter gradient.
inline LossAndGradient weighted_cross_entropy(const Mlp& model, const Matrix& batch, std::span<const int> labels,
                                              const Vector& weights) {
  if (weights.size() != batch.rows()) throw ShapeError("one weight per example required");
  if ((weights.array() < 0.0).any()) throw DomainError("example weights must be nonnegative");
  const double n = static_cast<double>(batch.rows());
  return coefficient_loss(model, batch, labels, weights / n);
}

/// Worst |analytic - central difference| / (|analytic| + 1e-8) over every parameter.
inline double grad_check(const Mlp& model, const Matrix& batch, std::span<const int> labels, const Vector& weights,
                         double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) throw DomainError("epsilon must lie in (0, 1e-3]");
  const Parameters analytic = weighted_cross_entropy(model, batch, labels, weights).gradient;
  Mlp probe = model;
  auto loss_at = [&]() { return weighted_cross_entropy(probe, batch, labels, weights).loss; };
  double worst = 0.0;
  auto check = [&](double& slot, double a) {
    const double saved = slot;
    slot = saved + epsilon;
    const double up = loss_at();
    slot = saved - epsilon;
    const double down = loss_at();
    slot = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double diff = std::abs(a - numeric);
    if (diff == 0.0) return;
    worst = std::max(worst, diff / (std::abs(a) + 1e-8));
  };
  for (std::size_t l = 0; l < probe.params().size(); ++l) {
    auto& layer = probe.params()[l];
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) check(layer.weight(r, c), analytic[l].weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) check(layer.bias(r), analytic[l].bias(r));
  }
  return worst;
}

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  int decay_every = 100;  // epochs
  double decay_factor = 0.1;
};

struct OptimizerState {
  AdamConfig config;
  double learning_rate = 0.0;
  long step = 0;
  int epoch = 0;
  Parameters first_moment;
  Parameters second_moment;
};

inline OptimizerState make_optimizer(const Mlp& model, const AdamConfig& config) {
  if (!(config.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  OptimizerState s;
  s.config = config;
  s.learning_rate = config.learning_rate;
  s.first_moment = zeros_like(model.params());
  s.second_moment = zeros_like(model.params());
  return s;
}

/// Marks the end of an epoch and applies the step decay schedule.
inline void advance_epoch(OptimizerState& state) {
  ++state.epoch;
  if (state.config.decay_every > 0) {
    state.learning_rate =
        state.config.learning_rate * std::pow(state.config.decay_factor, state.epoch / state.config.decay_every);
  }
}

inline void optimizer_step(Mlp& model, const Parameters& gradient, OptimizerState& state) {
  auto& params = model.params();
  if (gradient.size() != params.size() || state.first_moment.size() != params.size())
    throw ShapeError("gradient layout does not match the model");
  if (!all_finite(gradient)) throw NumericError("non-finite gradient");
  const auto& cfg = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double lr = state.learning_rate;

  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    if (theta.rows() != g.rows() || theta.cols() != g.cols()) throw ShapeError("gradient shape mismatch");
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    auto step = (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
    theta.array() -= lr * (step + cfg.weight_decay * theta.array());
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight, gradient[l].weight, state.first_moment[l].weight, state.second_moment[l].weight);
    update(params[l].bias, gradient[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
  }
}

}  // namespace giw
