#pragma once

// Image transforms (learned, exact or composed), the four EDT losses and the
// multi-head predictor. Templated on the scalar like diffcore so the whole
// loss stack can be finite-difference checked in double.

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edt/diffcore.hpp"
#include "edt/factors.hpp"

namespace edt::learn {

using diff::Gradients;
using diff::Matrix;
using diff::Network;
using factors::Element;
using factors::FactorTuple;
using factors::ProductLabelSpace;

/// Parameter gradients keyed by network, so a network that appears several
/// times in one computation (powers, shared augmenters) accumulates into one
/// buffer.
template <class T>
class GradientBook {
 public:
  Gradients<T>& of(const Network<T>& net) {
    for (auto& [key, g] : entries_)
      if (key == &net) return g;
    entries_.emplace_back(&net, Gradients<T>::zeros_like(net));
    return entries_.back().second;
  }

  const Gradients<T>* find(const Network<T>& net) const {
    for (const auto& [key, g] : entries_)
      if (key == &net) return &g;
    return nullptr;
  }

  void set_zero() {
    for (auto& e : entries_) e.second.set_zero();
  }

 private:
  std::deque<std::pair<const Network<T>*, Gradients<T>>> entries_;
};

/// A map X -> X on batches of flattened images. apply() optionally records
/// what pullback() needs to send an upstream gradient back to the input while
/// accumulating parameter gradients into a GradientBook.
template <class T>
class ImageTransform {
 public:
  struct Trace {
    virtual ~Trace() = default;
  };
  using TracePtr = std::unique_ptr<Trace>;

  virtual ~ImageTransform() = default;
  virtual Matrix<T> apply(const Matrix<T>& x, TracePtr* trace) const = 0;
  virtual Matrix<T> pullback(const Trace& trace, const Matrix<T>& upstream,
                             GradientBook<T>& book) const = 0;
  /// Factor this transform is meant to act on; nullopt for the identity and
  /// for mixed compositions.
  virtual std::optional<std::size_t> factor() const { return std::nullopt; }

  Matrix<T> operator()(const Matrix<T>& x) const { return apply(x, nullptr); }
};

template <class T>
class NetworkTransform final : public ImageTransform<T> {
  using Base = ImageTransform<T>;
  struct CacheTrace : Base::Trace {
    diff::ForwardCache<T> cache;
  };

 public:
  NetworkTransform(const Network<T>& net, std::optional<std::size_t> factor)
      : net_(&net), factor_(factor) {}

  Matrix<T> apply(const Matrix<T>& x, typename Base::TracePtr* trace) const override {
    if (!trace) return diff::forward(*net_, x);
    auto t = std::make_unique<CacheTrace>();
    Matrix<T> y = diff::forward(*net_, x, &t->cache);
    *trace = std::move(t);
    return y;
  }

  Matrix<T> pullback(const typename Base::Trace& trace, const Matrix<T>& upstream,
                     GradientBook<T>& book) const override {
    const auto& t = dynamic_cast<const CacheTrace&>(trace);
    return diff::backward(*net_, t.cache, upstream, book.of(*net_));
  }

  std::optional<std::size_t> factor() const override { return factor_; }

 private:
  const Network<T>* net_;
  std::optional<std::size_t> factor_;
};

template <class T>
class IdentityTransform final : public ImageTransform<T> {
  using Base = ImageTransform<T>;

 public:
  Matrix<T> apply(const Matrix<T>& x, typename Base::TracePtr* trace) const override {
    if (trace) *trace = std::make_unique<typename Base::Trace>();
    return x;
  }
  Matrix<T> pullback(const typename Base::Trace&, const Matrix<T>& upstream,
                     GradientBook<T>&) const override {
    return upstream;
  }
};

/// outer ∘ inner. Holds references; both must outlive the composition.
template <class T>
class ComposedTransform final : public ImageTransform<T> {
  using Base = ImageTransform<T>;
  struct PairTrace : Base::Trace {
    typename Base::TracePtr inner, outer;
  };

 public:
  ComposedTransform(const Base& outer, const Base& inner) : outer_(&outer), inner_(&inner) {}

  Matrix<T> apply(const Matrix<T>& x, typename Base::TracePtr* trace) const override {
    if (!trace) return outer_->apply(inner_->apply(x, nullptr), nullptr);
    auto t = std::make_unique<PairTrace>();
    Matrix<T> mid = inner_->apply(x, &t->inner);
    Matrix<T> y = outer_->apply(mid, &t->outer);
    *trace = std::move(t);
    return y;
  }

  Matrix<T> pullback(const typename Base::Trace& trace, const Matrix<T>& upstream,
                     GradientBook<T>& book) const override {
    const auto& t = dynamic_cast<const PairTrace&>(trace);
    return inner_->pullback(*t.inner, outer_->pullback(*t.outer, upstream, book), book);
  }

  std::optional<std::size_t> factor() const override {
    auto a = outer_->factor(), b = inner_->factor();
    if (!a) return b;
    if (!b) return a;
    return *a == *b ? a : std::nullopt;
  }

 private:
  const Base* outer_;
  const Base* inner_;
};

/// f applied k times; k = 0 is the identity.
template <class T>
class PowerTransform final : public ImageTransform<T> {
  using Base = ImageTransform<T>;
  struct ChainTrace : Base::Trace {
    std::vector<typename Base::TracePtr> steps;
  };

 public:
  PowerTransform(const Base& f, std::size_t k) : f_(&f), k_(k) {}

  Matrix<T> apply(const Matrix<T>& x, typename Base::TracePtr* trace) const override {
    std::unique_ptr<ChainTrace> t;
    if (trace) t = std::make_unique<ChainTrace>();
    Matrix<T> y = x;
    for (std::size_t s = 0; s < k_; ++s) {
      if (t) {
        t->steps.emplace_back();
        y = f_->apply(y, &t->steps.back());
      } else {
        y = f_->apply(y, nullptr);
      }
    }
    if (trace) *trace = std::move(t);
    return y;
  }

  Matrix<T> pullback(const typename Base::Trace& trace, const Matrix<T>& upstream,
                     GradientBook<T>& book) const override {
    const auto& t = dynamic_cast<const ChainTrace&>(trace);
    Matrix<T> g = upstream;
    for (std::size_t s = t.steps.size(); s-- > 0;) g = f_->pullback(*t.steps[s], g, book);
    return g;
  }

  std::optional<std::size_t> factor() const override { return k_ == 0 ? std::nullopt : f_->factor(); }

 private:
  const Base* f_;
  std::size_t k_;
};

/// Wraps a fixed, non-trainable map (for instance the exact action on
/// images). Its pullback is undefined and throws.
template <class T>
class FunctionTransform final : public ImageTransform<T> {
  using Base = ImageTransform<T>;

 public:
  FunctionTransform(std::function<Matrix<T>(const Matrix<T>&)> fn, std::optional<std::size_t> factor)
      : fn_(std::move(fn)), factor_(factor) {}

  Matrix<T> apply(const Matrix<T>& x, typename Base::TracePtr* trace) const override {
    if (trace) *trace = std::make_unique<typename Base::Trace>();
    return fn_(x);
  }
  Matrix<T> pullback(const typename Base::Trace&, const Matrix<T>&, GradientBook<T>&) const override {
    throw std::logic_error("fixed image transform has no gradient");
  }
  std::optional<std::size_t> factor() const override { return factor_; }

 private:
  std::function<Matrix<T>(const Matrix<T>&)> fn_;
  std::optional<std::size_t> factor_;
};

class LossError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Augmentation losses. Each returns the mean pixel distance; when `book` is
// given, gradients of scale * loss are accumulated into it.

/// d(aug(x), x_target) over matched rows.
template <class T>
double loss_l0(const ImageTransform<T>& aug, const Matrix<T>& x, const Matrix<T>& x_target,
               diff::PixelDistance d, GradientBook<T>* book = nullptr, T scale = T(1)) {
  if (x.rows() == 0) throw LossError("loss_l0: empty batch");
  typename ImageTransform<T>::TracePtr trace;
  Matrix<T> y = aug.apply(x, book ? &trace : nullptr);
  auto loss = diff::pixel_distance(d, y, x_target);
  if (book) aug.pullback(*trace, loss.grad_a * scale, *book);
  return loss.value;
}

/// d(aug_j(aug_k(x)), aug_jk(x)); all three must act on the same factor.
template <class T>
double loss_l1(const ImageTransform<T>& aug_j, const ImageTransform<T>& aug_k,
               const ImageTransform<T>& aug_jk, const Matrix<T>& x, diff::PixelDistance d,
               GradientBook<T>* book = nullptr, T scale = T(1)) {
  if (x.rows() == 0) throw LossError("loss_l1: empty batch");
  std::optional<std::size_t> f;
  for (const ImageTransform<T>* a : {&aug_j, &aug_k, &aug_jk}) {
    auto g = a->factor();
    if (!g) continue;
    if (f && *f != *g) throw LossError("loss_l1: augmenters act on different factors");
    f = g;
  }
  typename ImageTransform<T>::TracePtr tk, tj, tjk;
  const bool record = book != nullptr;
  Matrix<T> lhs = aug_j.apply(aug_k.apply(x, record ? &tk : nullptr), record ? &tj : nullptr);
  Matrix<T> rhs = aug_jk.apply(x, record ? &tjk : nullptr);
  auto loss = diff::pixel_distance(d, lhs, rhs);
  if (book) {
    aug_k.pullback(*tk, aug_j.pullback(*tj, loss.grad_a * scale, *book), *book);
    aug_jk.pullback(*tjk, loss.grad_b * scale, *book);
  }
  return loss.value;
}

/// d(b(a(x)), a(b(x))) for augmenters of two different factors.
template <class T>
double loss_l2(const ImageTransform<T>& a, const ImageTransform<T>& b, const Matrix<T>& x,
               diff::PixelDistance d, GradientBook<T>* book = nullptr, T scale = T(1)) {
  if (x.rows() == 0) throw LossError("loss_l2: empty batch");
  auto fa = a.factor(), fb = b.factor();
  if (fa && fb && *fa == *fb) throw LossError("loss_l2: both augmenters act on the same factor");
  typename ImageTransform<T>::TracePtr ta1, tb1, tb2, ta2;
  const bool record = book != nullptr;
  Matrix<T> ba = b.apply(a.apply(x, record ? &ta1 : nullptr), record ? &tb1 : nullptr);
  Matrix<T> ab = a.apply(b.apply(x, record ? &tb2 : nullptr), record ? &ta2 : nullptr);
  auto loss = diff::pixel_distance(d, ba, ab);
  if (book) {
    a.pullback(*ta1, b.pullback(*tb1, loss.grad_a * scale, *book), *book);
    b.pullback(*tb2, a.pullback(*ta2, loss.grad_b * scale, *book), *book);
  }
  return loss.value;
}

// ---------------------------------------------------------------------------
// Predictor: shared relu trunk, one head per factor. Classified factors get
// logits trained with softmax cross-entropy; ordinal factors get one sigmoid
// unit regressed (mse) onto value / (cardinality - 1).

template <class T>
struct Predictor {
  Network<T> trunk;
  std::vector<Network<T>> heads;

  static Predictor init(const ProductLabelSpace& space, std::size_t input_dim,
                        std::span<const std::size_t> hidden, Rng& rng) {
    if (hidden.empty()) throw std::invalid_argument("predictor needs at least one hidden layer");
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    std::vector<diff::Activation> acts(hidden.size(), diff::Activation::Relu);
    Predictor p;
    p.trunk = Network<T>::glorot(dims, acts, rng);
    for (const auto& f : space.factors()) {
      const std::size_t out = f.is_classified() ? f.cardinality : 1;
      const std::size_t hd[] = {hidden.back(), out};
      const diff::Activation ha[] = {f.is_classified() ? diff::Activation::Identity
                                                       : diff::Activation::Sigmoid};
      p.heads.push_back(Network<T>::glorot(hd, ha, rng));
    }
    return p;
  }
};

template <class T>
struct PredictorGrads {
  Gradients<T> trunk;
  std::vector<Gradients<T>> heads;

  static PredictorGrads zeros_like(const Predictor<T>& p) {
    PredictorGrads g{Gradients<T>::zeros_like(p.trunk), {}};
    for (const auto& h : p.heads) g.heads.push_back(Gradients<T>::zeros_like(h));
    return g;
  }
  void set_zero() {
    trunk.set_zero();
    for (auto& h : heads) h.set_zero();
  }
};

/// Normalized regression target of an ordinal value.
inline double ordinal_target(std::uint32_t value, std::uint32_t cardinality) {
  return cardinality > 1 ? static_cast<double>(value) / (cardinality - 1) : 0.0;
}

struct SupervisedLoss {
  double total = 0.0;
  std::vector<double> per_head;
};

/// Sum over heads of the per-head batch-mean loss. With `grads`, accumulates
/// gradients of scale * total.
template <class T>
SupervisedLoss supervised_loss(const ProductLabelSpace& space, const Predictor<T>& p, const Matrix<T>& x,
                               std::span<const FactorTuple> labels, PredictorGrads<T>* grads = nullptr,
                               T scale = T(1)) {
  if (static_cast<std::size_t>(x.rows()) != labels.size() || labels.empty())
    throw diff::ShapeError("supervised_loss: batch and labels differ in size");
  if (p.heads.size() != space.num_factors()) throw diff::ShapeError("predictor does not match roster");
  diff::ForwardCache<T> trunk_cache;
  Matrix<T> h = diff::forward(p.trunk, x, grads ? &trunk_cache : nullptr);
  Matrix<T> dh;
  if (grads) dh = Matrix<T>::Zero(h.rows(), h.cols());
  SupervisedLoss out;
  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    const auto& f = space.factor(i);
    diff::ForwardCache<T> cache;
    Matrix<T> o = diff::forward(p.heads[i], h, grads ? &cache : nullptr);
    Matrix<T> g;
    if (f.is_classified()) {
      std::vector<std::uint32_t> cls(labels.size());
      for (std::size_t r = 0; r < labels.size(); ++r) cls[r] = labels[r][i];
      auto l = diff::loss_softmax_ce<T>(o, cls);
      out.per_head.push_back(l.value);
      g = std::move(l.grad);
    } else {
      Matrix<T> target(o.rows(), 1);
      for (std::size_t r = 0; r < labels.size(); ++r)
        target(static_cast<Eigen::Index>(r), 0) = static_cast<T>(ordinal_target(labels[r][i], f.cardinality));
      auto l = diff::loss_mse<T>(o, target);
      out.per_head.push_back(l.value);
      g = std::move(l.grad_a);
    }
    out.total += out.per_head.back();
    if (grads) dh += diff::backward<T>(p.heads[i], cache, Matrix<T>(g * scale), grads->heads[i]);
  }
  if (grads) diff::backward(p.trunk, trunk_cache, dh, grads->trunk, false);
  return out;
}

/// Per-factor outputs: class probabilities are reduced to the argmax, ordinal
/// heads report the normalized scalar.
template <class T>
std::vector<std::vector<double>> predict(const ProductLabelSpace& space, const Predictor<T>& p,
                                         const Matrix<T>& x) {
  Matrix<T> h = diff::forward(p.trunk, x);
  std::vector<std::vector<double>> out(space.num_factors());
  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    Matrix<T> o = diff::forward(p.heads[i], h);
    for (Eigen::Index r = 0; r < o.rows(); ++r) {
      if (space.factor(i).is_classified()) {
        Eigen::Index best = 0;
        o.row(r).maxCoeff(&best);
        out[i].push_back(static_cast<double>(best));
      } else {
        out[i].push_back(static_cast<double>(o(r, 0)));
      }
    }
  }
  return out;
}

/// One generator application on the label side of an augmentation.
struct ActionStep {
  std::size_t factor;
  Element element;
};

/// Supervised loss on (aug(x), act(steps, y)). The steps are applied to the
/// labels in order, so `aug` must apply the matching image maps in the same
/// order (first step innermost).
template <class T>
SupervisedLoss loss_l3(const ProductLabelSpace& space, const Predictor<T>& p, const ImageTransform<T>& aug,
                       std::span<const ActionStep> steps, const Matrix<T>& x,
                       std::span<const FactorTuple> labels, PredictorGrads<T>* grads = nullptr,
                       T scale = T(1)) {
  std::vector<FactorTuple> moved(labels.begin(), labels.end());
  for (auto& y : moved)
    for (const auto& s : steps) y = factors::act_factor(space, s.factor, s.element, y);
  return supervised_loss<T>(space, p, aug(x), moved, grads, scale);
}

template <class T>
SupervisedLoss loss_l3(const ProductLabelSpace& space, const Predictor<T>& p, const ImageTransform<T>& aug,
                       std::size_t factor, Element a, const Matrix<T>& x, std::span<const FactorTuple> labels,
                       PredictorGrads<T>* grads = nullptr, T scale = T(1)) {
  const ActionStep step{factor, a};
  return loss_l3<T>(space, p, aug, std::span<const ActionStep>(&step, 1), x, labels, grads, scale);
}

}  // namespace edt::learn
