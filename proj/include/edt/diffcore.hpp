#pragma once

// Minimal reverse-mode stack for dense networks: forward with a cache,
// exact backward, pixel / classification losses and Adam.
//
// Everything is templated on the scalar so training runs in float while
// finite-difference checks run the same code in double.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edt/rng.hpp"

namespace edt::diff {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Sigmoid = 2, Tanh = 3 };

template <class Derived>
void ensure_finite(const Eigen::MatrixBase<Derived>& m, const char* where) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite value in ") + where);
}

/// y = act(x W + b) with W stored in x out.
template <class T>
struct Layer {
  Matrix<T> weight;
  RowVector<T> bias;
  Activation activation = Activation::Identity;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

template <class T>
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer<T>> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      if (layers_[k].bias.size() != layers_[k].weight.cols())
        throw ShapeError("layer " + std::to_string(k) + ": bias width mismatch");
      if (k > 0 && layers_[k].in_dim() != layers_[k - 1].out_dim())
        throw ShapeError("layer " + std::to_string(k) + " does not chain with its predecessor");
    }
  }

  /// Uniform init in ±sqrt(6 / (fan_in + fan_out)); biases zero.
  static Network glorot(std::span<const std::size_t> dims, std::span<const Activation> acts,
                        Rng& rng) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
      throw ShapeError("glorot: need dims.size() == acts.size() + 1 >= 2");
    std::vector<Layer<T>> layers;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      const double bound = std::sqrt(6.0 / static_cast<double>(dims[k] + dims[k + 1]));
      Layer<T> layer;
      layer.weight.resize(static_cast<Eigen::Index>(dims[k]), static_cast<Eigen::Index>(dims[k + 1]));
      for (Eigen::Index i = 0; i < layer.weight.size(); ++i)
        layer.weight.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
      layer.bias = RowVector<T>::Zero(static_cast<Eigen::Index>(dims[k + 1]));
      layer.activation = acts[k];
      layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
  }

  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return layers_.front().in_dim(); }
  std::size_t output_dim() const { return layers_.back().out_dim(); }
  const Layer<T>& layer(std::size_t k) const { return layers_.at(k); }
  Layer<T>& layer(std::size_t k) { return layers_.at(k); }
  const std::vector<Layer<T>>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  template <class U>
  Network<U> cast() const {
    std::vector<Layer<U>> out;
    for (const auto& l : layers_)
      out.push_back(Layer<U>{l.weight.template cast<U>(), l.bias.template cast<U>(), l.activation});
    return Network<U>(std::move(out));
  }

 private:
  std::vector<Layer<T>> layers_;
};

/// values[0] is the input, values[k + 1] the output of layer k.
template <class T>
struct ForwardCache {
  std::vector<Matrix<T>> values;
};

template <class T>
void apply_activation(Activation act, Matrix<T>& z) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Relu: z = z.cwiseMax(T(0)); break;
    case Activation::Sigmoid: z = (T(1) / (T(1) + (-z.array()).exp())).matrix(); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
  }
}

/// Multiplies `grad` in place by the activation derivative, expressed through
/// the layer output y.
template <class T>
void scale_by_activation_derivative(Activation act, const Matrix<T>& y, Matrix<T>& grad) {
  switch (act) {
    case Activation::Identity: break;
    case Activation::Relu: grad = (y.array() > T(0)).select(grad.array(), T(0)).matrix(); break;
    case Activation::Sigmoid: grad = (grad.array() * y.array() * (T(1) - y.array())).matrix(); break;
    case Activation::Tanh: grad = (grad.array() * (T(1) - y.array().square())).matrix(); break;
  }
}

template <class T>
Matrix<T> forward(const Network<T>& net, const Matrix<T>& x, ForwardCache<T>* cache = nullptr) {
  if (static_cast<std::size_t>(x.cols()) != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  if (cache) {
    cache->values.clear();
    cache->values.push_back(x);
  }
  Matrix<T> a = x;
  for (const auto& layer : net.layers()) {
    Matrix<T> z(a.rows(), layer.weight.cols());
    z.noalias() = a * layer.weight;
    z.rowwise() += layer.bias;
    apply_activation(layer.activation, z);
    a = std::move(z);
    if (cache) cache->values.push_back(a);
  }
  ensure_finite(a, "network output");
  return a;
}

template <class T>
struct Gradients {
  std::vector<Matrix<T>> weight;
  std::vector<RowVector<T>> bias;

  static Gradients zeros_like(const Network<T>& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
      g.weight.push_back(Matrix<T>::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(RowVector<T>::Zero(l.bias.size()));
    }
    return g;
  }

  void set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
  }

  void add(const Gradients& other, T scale = T(1)) {
    for (std::size_t k = 0; k < weight.size(); ++k) {
      weight[k] += scale * other.weight[k];
      bias[k] += scale * other.bias[k];
    }
  }
};

/// Accumulates parameter gradients into `grads` (+=) and returns the gradient
/// with respect to the network input.
template <class T>
Matrix<T> backward(const Network<T>& net, const ForwardCache<T>& cache, const Matrix<T>& upstream,
                   Gradients<T>& grads, bool need_input_grad = true) {
  const std::size_t n = net.num_layers();
  if (cache.values.size() != n + 1) throw ShapeError("backward: cache does not match the network");
  if (grads.weight.size() != n) throw ShapeError("backward: gradient buffer does not match the network");
  for (std::size_t k = 0; k < n; ++k) {
    if (static_cast<std::size_t>(cache.values[k + 1].cols()) != net.layer(k).out_dim() ||
        cache.values[k + 1].rows() != cache.values[0].rows())
      throw ShapeError("backward: cache does not match the network");
  }
  if (upstream.rows() != cache.values[n].rows() || upstream.cols() != cache.values[n].cols())
    throw ShapeError("backward: upstream gradient shape mismatch");

  Matrix<T> grad = upstream;
  for (std::size_t k = n; k-- > 0;) {
    const auto& layer = net.layer(k);
    scale_by_activation_derivative(layer.activation, cache.values[k + 1], grad);
    grads.weight[k].noalias() += cache.values[k].transpose() * grad;
    grads.bias[k] += grad.colwise().sum();
    if (k == 0 && !need_input_grad) return {};
    Matrix<T> prev(grad.rows(), layer.weight.rows());
    prev.noalias() = grad * layer.weight.transpose();
    grad = std::move(prev);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Losses. Values are accumulated in double; gradients are means over every
// element (pixel losses) or over the batch (classification).

enum class PixelDistance : std::uint8_t { Bce = 0, Mse = 1 };

inline constexpr double kBceClamp = 1e-7;

/// Loss between two tensors with gradients for both arguments.
template <class T>
struct PairLoss {
  double value = 0.0;
  Matrix<T> grad_a;
  Matrix<T> grad_b;
};

template <class T>
void check_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(where) + ": shape mismatch");
  if (a.size() == 0) throw ShapeError(std::string(where) + ": empty input");
}

template <class T>
PairLoss<T> loss_mse(const Matrix<T>& pred, const Matrix<T>& target) {
  check_same_shape(pred, target, "mse");
  const double n = static_cast<double>(pred.size());
  PairLoss<T> out;
  Matrix<T> diff = pred - target;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    const double d = static_cast<double>(diff.data()[i]);
    acc += d * d;
  }
  out.value = acc / n;
  out.grad_a = diff * static_cast<T>(2.0 / n);
  out.grad_b = -out.grad_a;
  return out;
}

/// Pixel-wise binary cross-entropy; pred is clamped to [eps, 1 - eps]. The
/// target may itself be a network output, so its gradient is returned too.
template <class T>
PairLoss<T> loss_bce(const Matrix<T>& pred, const Matrix<T>& target) {
  check_same_shape(pred, target, "bce");
  const double n = static_cast<double>(pred.size());
  PairLoss<T> out;
  out.grad_a.resize(pred.rows(), pred.cols());
  out.grad_b.resize(pred.rows(), pred.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred.data()[i]), kBceClamp, 1.0 - kBceClamp);
    const double t = static_cast<double>(target.data()[i]);
    const double lp = std::log(p), lq = std::log1p(-p);
    acc -= t * lp + (1.0 - t) * lq;
    out.grad_a.data()[i] = static_cast<T>((p - t) / (p * (1.0 - p)) / n);
    out.grad_b.data()[i] = static_cast<T>((lq - lp) / n);
  }
  out.value = acc / n;
  return out;
}

template <class T>
PairLoss<T> pixel_distance(PixelDistance d, const Matrix<T>& a, const Matrix<T>& b) {
  return d == PixelDistance::Bce ? loss_bce(a, b) : loss_mse(a, b);
}

template <class T>
struct LossGrad {
  double value = 0.0;
  Matrix<T> grad;
};

/// Mean over the batch of -log softmax(logits)[class].
template <class T>
LossGrad<T> loss_softmax_ce(const Matrix<T>& logits, std::span<const std::uint32_t> classes) {
  if (static_cast<std::size_t>(logits.rows()) != classes.size() || logits.size() == 0)
    throw ShapeError("softmax_ce: batch size mismatch");
  const double b = static_cast<double>(logits.rows());
  LossGrad<T> out;
  out.grad.resize(logits.rows(), logits.cols());
  double acc = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    if (classes[r] >= static_cast<std::uint32_t>(logits.cols())) throw ShapeError("softmax_ce: class id out of range");
    double mx = -INFINITY;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) mx = std::max(mx, static_cast<double>(logits(r, c)));
    double z = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(r, c)) - mx);
    const double lse = mx + std::log(z);
    acc += lse - static_cast<double>(logits(r, classes[r]));
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double p = std::exp(static_cast<double>(logits(r, c)) - lse);
      out.grad(r, c) = static_cast<T>((p - (c == static_cast<Eigen::Index>(classes[r]) ? 1.0 : 0.0)) / b);
    }
  }
  out.value = acc / b;
  return out;
}

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every parameter of one network.
template <class T>
class Adam {
 public:
  Adam(const Network<T>& net, AdamConfig config)
      : config_(config), m_(Gradients<T>::zeros_like(net)), v_(Gradients<T>::zeros_like(net)) {}

  void step(Network<T>& net, const Gradients<T>& g) {
    if (g.weight.size() != net.num_layers()) throw ShapeError("adam: gradient does not match the network");
    for (std::size_t k = 0; k < g.weight.size(); ++k) {
      ensure_finite(g.weight[k], "adam gradient");
      ensure_finite(g.bias[k], "adam gradient");
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < g.weight.size(); ++k) {
      auto& layer = net.layer(k);
      update(layer.weight, m_.weight[k], v_.weight[k], g.weight[k], c1, c2);
      update(layer.bias, m_.bias[k], v_.bias[k], g.bias[k], c1, c2);
    }
  }

  std::uint64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const Gradients<T>& first_moment() const { return m_; }
  const Gradients<T>& second_moment() const { return v_; }

  void restore(std::uint64_t steps, Gradients<T> m, Gradients<T> v) {
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  template <class P, class G>
  void update(P& param, G& m, G& v, const G& g, double c1, double c2) {
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    m = b1 * m + (T(1) - b1) * g;
    v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
    const T lr = static_cast<T>(config_.lr);
    const T eps = static_cast<T>(config_.eps);
    param.array() -= lr * (m.array() / static_cast<T>(c1)) /
                     ((v.array() / static_cast<T>(c2)).sqrt() + eps);
  }

  AdamConfig config_;
  Gradients<T> m_, v_;
  std::uint64_t steps_ = 0;
};

}  // namespace edt::diff
