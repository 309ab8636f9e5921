#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "edt/learn.hpp"
#include "edt/scenes.hpp"
#include "edt/training.hpp"

using namespace edt::learn;
using edt::Rng;
using edt::diff::Activation;
using edt::diff::PixelDistance;
using edt::factors::FactorKind;
using edt::factors::make_factor;

namespace {

constexpr double kStep = 1e-4;
constexpr double kRelTol = 1e-4;

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

Network<double> image_net(Rng& rng, std::size_t dim = 6) {
  const std::size_t dims[] = {dim, 5, dim};
  const Activation acts[] = {Activation::Tanh, Activation::Sigmoid};
  auto net = Network<double>::glorot(dims, acts, rng);
  for (std::size_t k = 0; k < net.num_layers(); ++k)
    for (Eigen::Index i = 0; i < net.layer(k).bias.size(); ++i) net.layer(k).bias(i) = rng.uniform(-0.3, 0.3);
  return net;
}

Matrix<double> images(Rng& rng, Eigen::Index rows, Eigen::Index cols = 6) {
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.1, 0.9);
  return m;
}

// Every weight and bias of `net` against a central difference of f.
double max_param_error(Network<double>& net, const Gradients<double>& g, const std::function<double()>& f) {
  double worst = 0.0;
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    auto probe = [&](double& p, double analytic) {
      const double keep = p;
      p = keep + kStep;
      const double up = f();
      p = keep - kStep;
      const double down = f();
      p = keep;
      worst = std::max(worst, rel_err((up - down) / (2 * kStep), analytic));
    };
    auto& l = net.layer(k);
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) probe(l.weight.data()[i], g.weight[k].data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) probe(l.bias.data()[i], g.bias[k].data()[i]);
  }
  return worst;
}

}  // namespace

TEST(Losses, PairLossGradients) {
  for (auto d : {PixelDistance::Bce, PixelDistance::Mse}) {
    Rng rng(1);
    auto net = image_net(rng);
    NetworkTransform<double> aug(net, 0);
    auto x = images(rng, 4), t = images(rng, 4);
    GradientBook<double> book;
    const double v = loss_l0<double>(aug, x, t, d, &book, 0.7);
    EXPECT_DOUBLE_EQ(v, loss_l0<double>(aug, x, t, d));
    Gradients<double> g = book.of(net);
    EXPECT_LT(max_param_error(net, g, [&] { return 0.7 * loss_l0<double>(aug, x, t, d); }), kRelTol);
  }
}

TEST(Losses, CompositionLossGradientsWithSharedNetworks) {
  // aug_j = f, aug_k = f^2, aug_jk = h: f appears three times in one term.
  for (auto d : {PixelDistance::Bce, PixelDistance::Mse}) {
    Rng rng(2);
    auto f = image_net(rng), h = image_net(rng);
    NetworkTransform<double> tf(f, 1), th(h, 1);
    PowerTransform<double> f2(tf, 2);
    auto x = images(rng, 3);
    GradientBook<double> book;
    loss_l1<double>(tf, f2, th, x, d, &book);
    auto value = [&] { return loss_l1<double>(tf, f2, th, x, d); };
    Gradients<double> gf = book.of(f), gh = book.of(h);
    EXPECT_LT(max_param_error(f, gf, value), kRelTol);
    EXPECT_LT(max_param_error(h, gh, value), kRelTol);
  }
}

TEST(Losses, CommutationLossGradients) {
  for (auto d : {PixelDistance::Bce, PixelDistance::Mse}) {
    Rng rng(3);
    auto a = image_net(rng), b = image_net(rng);
    NetworkTransform<double> ta(a, 0), tb(b, 2);
    auto x = images(rng, 3);
    GradientBook<double> book;
    loss_l2<double>(ta, tb, x, d, &book, 2.0);
    auto value = [&] { return 2.0 * loss_l2<double>(ta, tb, x, d); };
    Gradients<double> ga = book.of(a), gb = book.of(b);
    EXPECT_LT(max_param_error(a, ga, value), kRelTol);
    EXPECT_LT(max_param_error(b, gb, value), kRelTol);
  }
}

TEST(Losses, SupervisedAndAugmentedLossGradients) {
  edt::factors::ProductLabelSpace space({make_factor("color", FactorKind::Cyclic, 3),
                                         make_factor("pos_x", FactorKind::Ordinal, 4)});
  Rng rng(4);
  const std::size_t hidden[] = {5, 4};
  auto p = Predictor<double>::init(space, 6, hidden, rng);
  auto aug_net = image_net(rng);
  NetworkTransform<double> aug(aug_net, 1);
  auto x = images(rng, 5);
  std::vector<FactorTuple> labels;
  for (std::uint32_t k = 0; k < 5; ++k) labels.push_back(FactorTuple{{k % 3, (k * 3) % 4}});

  auto grads = PredictorGrads<double>::zeros_like(p);
  loss_l3<double>(space, p, aug, 1, 1, x, labels, &grads, 0.5);
  auto value = [&] { return 0.5 * loss_l3<double>(space, p, aug, 1, 1, x, labels).total; };
  EXPECT_LT(max_param_error(p.trunk, grads.trunk, value), kRelTol);
  for (std::size_t i = 0; i < p.heads.size(); ++i)
    EXPECT_LT(max_param_error(p.heads[i], grads.heads[i], value), kRelTol) << "head " << i;
}

TEST(Losses, AugmentedLossMovesLabels) {
  edt::factors::ProductLabelSpace space({make_factor("color", FactorKind::Cyclic, 3),
                                         make_factor("pos_x", FactorKind::Ordinal, 4)});
  Rng rng(5);
  const std::size_t hidden[] = {4};
  auto p = Predictor<double>::init(space, 6, hidden, rng);
  IdentityTransform<double> id;
  auto x = images(rng, 3);
  std::vector<FactorTuple> y{FactorTuple{{0, 3}}, FactorTuple{{2, 1}}, FactorTuple{{1, 0}}};
  std::vector<FactorTuple> moved{FactorTuple{{2, 3}}, FactorTuple{{1, 1}}, FactorTuple{{0, 0}}};
  const ActionStep steps[] = {{0, 1}, {0, 1}};
  EXPECT_DOUBLE_EQ(loss_l3<double>(space, p, id, steps, x, y).total,
                   supervised_loss<double>(space, p, x, moved).total);
}

TEST(Losses, IdentitiesVanish) {
  Rng rng(6);
  auto f = image_net(rng), g = image_net(rng);
  NetworkTransform<double> tf(f, 0), tg(g, 0), other(g, 1);
  ComposedTransform<double> literal(tf, tg);
  IdentityTransform<double> id;
  auto x = images(rng, 4);
  EXPECT_LE(loss_l1<double>(tf, tg, literal, x, PixelDistance::Mse), 1e-10);
  EXPECT_LE(loss_l2<double>(tf, id, x, PixelDistance::Mse), 1e-10);
  EXPECT_LE(loss_l2<double>(id, other, x, PixelDistance::Mse), 1e-10);
  EXPECT_GT(loss_l2<double>(tf, other, x, PixelDistance::Mse), 1e-6);
}

TEST(Losses, FactorMismatchRejected) {
  Rng rng(7);
  auto f = image_net(rng);
  NetworkTransform<double> a(f, 0), b(f, 1);
  auto x = images(rng, 2);
  EXPECT_THROW(loss_l1<double>(a, b, a, x, PixelDistance::Mse), LossError);
  EXPECT_THROW(loss_l2<double>(a, a, x, PixelDistance::Mse), LossError);
  EXPECT_THROW(loss_l0<double>(a, Matrix<double>(0, 6), Matrix<double>(0, 6), PixelDistance::Mse), LossError);
  IdentityTransform<double> id;
  EXPECT_THROW(loss_l2<double>(a, id, Matrix<double>(0, 6), PixelDistance::Mse), LossError);
}

TEST(Losses, ExactActionsZeroEveryAugmentationLoss) {
  edt::factors::ProductLabelSpace space({make_factor("color", FactorKind::Cyclic, 5),
                                         make_factor("pos_x", FactorKind::Ordinal, 10)});
  edt::scenes::RenderParams params;
  edt::scenes::NearestDecoder dec(space, params);
  auto data = edt::scenes::render_grid(space, params);
  std::vector<edt::factors::CellId> cells;
  for (edt::factors::CellId c = 0; c < 50; c += 3) cells.push_back(c);
  Matrix<double> x = edt::training::images_of(data, cells).cast<double>();

  auto color = edt::training::oracle_transform<double>(space, dec, 0, 1);
  auto shift = edt::training::oracle_transform<double>(space, dec, 1, 1);
  // ℓ0 against the true successors
  std::vector<edt::factors::CellId> next;
  for (auto c : cells) next.push_back(space.cell_of(edt::factors::act_factor(space, 0, 1, space.tuple_of(c))));
  Matrix<double> xt = edt::training::images_of(data, next).cast<double>();
  EXPECT_LE(loss_l0<double>(*color, x, xt, PixelDistance::Mse), 1e-10);
  // ℓ1: c^5 = identity, and c^2 against the exact element 2
  PowerTransform<double> c5(*color, 5), c2(*color, 2);
  IdentityTransform<double> id;
  auto two = edt::training::oracle_transform<double>(space, dec, 0, 2);
  EXPECT_LE(loss_l1<double>(c5, id, id, x, PixelDistance::Mse), 1e-10);
  EXPECT_LE(loss_l1<double>(*color, *color, *two, x, PixelDistance::Mse), 1e-10);
  // ℓ1 for the saturating shift: s^10 = s^9
  PowerTransform<double> s9(*shift, 9);
  EXPECT_LE(loss_l1<double>(*shift, s9, s9, x, PixelDistance::Mse), 1e-10);
  // ℓ2 across factors
  EXPECT_LE(loss_l2<double>(*color, *shift, x, PixelDistance::Mse), 1e-10);
}
