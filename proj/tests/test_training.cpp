#include <gtest/gtest.h>

#include "edt/training.hpp"

using namespace edt::training;
using edt::factors::FactorKind;
using edt::factors::make_factor;
using edt::learn::FunctionTransform;
using edt::learn::ImageTransform;

namespace {

// color x pos_x keeps training fast while exercising both monoid kinds.
ProductLabelSpace small_space() {
  return ProductLabelSpace({make_factor("color", FactorKind::Cyclic, 5),
                            make_factor("pos_x", FactorKind::Ordinal, 10)});
}

EdtConfig tiny_config() {
  EdtConfig cfg;
  cfg.aug_iters = 12;
  cfg.pred_iters = 15;
  cfg.aug_hidden = 16;
  cfg.pred_hidden = {16, 8};
  cfg.batch = 8;
  cfg.reg_batch = 4;
  cfg.log_every = 5;
  cfg.seed = 3;
  return cfg;
}

template <class T>
bool same_network(const edt::diff::Network<T>& a, const edt::diff::Network<T>& b) {
  if (a.num_layers() != b.num_layers()) return false;
  for (std::size_t k = 0; k < a.num_layers(); ++k)
    if (a.layer(k).weight != b.layer(k).weight || a.layer(k).bias != b.layer(k).bias) return false;
  return true;
}

}  // namespace

TEST(Training, ConfigValidation) {
  EXPECT_NO_THROW(validate(EdtConfig{}));
  auto bad = EdtConfig{};
  bad.batch = 0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = EdtConfig{};
  bad.lambda2 = -1;
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = EdtConfig{};
  bad.pred_hidden.clear();
  EXPECT_THROW(validate(bad), std::invalid_argument);
  bad = EdtConfig{};
  bad.lr_aug = 0;
  EXPECT_THROW(validate(bad), std::invalid_argument);
}

TEST(Training, LogLineKeysInOrder) {
  LogRecord r{7, 0.5, 0.25, 0, 1, 2};
  EXPECT_EQ(to_json_line(r), R"({"iter":7,"l0":0.5,"l1":0.25,"l2":0.0,"l3":1.0,"sup":2.0})");
}

TEST(Training, StreamsAreIndependentAndReproducible) {
  auto a = stream(1, 2), b = stream(1, 2), c = stream(1, 3), d = stream(2, 2);
  const auto va = a.next();
  EXPECT_EQ(va, b.next());
  EXPECT_NE(va, c.next());
  EXPECT_NE(va, d.next());
}

TEST(Training, AugmenterAndPredictorTrainingIsDeterministic) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  auto mask = edt::splits::split_rand(space, 0.5, 1);
  auto cfg = tiny_config();
  auto r1 = train_augmenters(data, mask, cfg);
  auto r2 = train_augmenters(data, mask, cfg);
  ASSERT_EQ(r1.augmenters.size(), 2u);  // one generator per factor
  for (std::size_t k = 0; k < r1.augmenters.size(); ++k) {
    EXPECT_EQ(r1.augmenters[k].factor, k);
    EXPECT_EQ(r1.augmenters[k].element, 1u);
    EXPECT_TRUE(same_network(r1.augmenters[k].net, r2.augmenters[k].net));
    EXPECT_EQ(r1.augmenters[k].opt.steps, cfg.aug_iters);
  }
  ASSERT_EQ(r1.log.size(), 2u);  // iterations 5 and 10
  EXPECT_EQ(r1.log[0].iter, 5u);
  EXPECT_EQ(to_json_line(r1.log[1]), to_json_line(r2.log[1]));

  auto p1 = train_predictor(data, mask, r1.augmenters, cfg);
  auto p2 = train_predictor(data, mask, r2.augmenters, cfg);
  EXPECT_TRUE(same_network(p1.predictor.model.trunk, p2.predictor.model.trunk));
  for (std::size_t i = 0; i < space.num_factors(); ++i)
    EXPECT_TRUE(same_network(p1.predictor.model.heads[i], p2.predictor.model.heads[i]));
  EXPECT_GT(p1.log.back().l3, 0.0);

  cfg.seed = 4;
  auto r3 = train_augmenters(data, mask, cfg);
  EXPECT_FALSE(same_network(r1.augmenters[0].net, r3.augmenters[0].net));
}

TEST(Training, RegularizerWeightsChangeOnlyWhatTheyShould) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  auto mask = edt::splits::split_rand(space, 0.5, 1);
  auto cfg = tiny_config();
  cfg.lambda1 = cfg.lambda2 = 0;
  auto plain = train_augmenters(data, mask, cfg);
  for (const auto& l : plain.log) {
    EXPECT_GT(l.l0, 0.0);
    EXPECT_EQ(l.l1, 0.0);
    EXPECT_EQ(l.l2, 0.0);
  }
}

TEST(Training, MissingPairsAbort) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  edt::splits::SplitMask lonely{"rand:0.5", 0, std::vector<std::uint8_t>(space.grid_size(), 0)};
  lonely.train[0] = 1;  // no colour successor in train
  EXPECT_THROW(train_augmenters(data, lonely, tiny_config()), TrainingError);
}

TEST(Training, ErmIgnoresAugmentersAndOracleNeedsNone) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  auto mask = edt::splits::split_rand(space, 0.5, 2);
  auto cfg = tiny_config();
  cfg.use_aug = false;
  auto erm = train_predictor(data, mask, {}, cfg);
  for (const auto& l : erm.log) EXPECT_EQ(l.l3, 0.0);
  cfg.use_aug = true;
  EXPECT_THROW(train_predictor(data, mask, {}, cfg), TrainingError);
  cfg.oracle = true;
  auto oracle = train_predictor(data, mask, {}, cfg);
  EXPECT_GT(oracle.log.back().l3, 0.0);
}

TEST(Training, ExactAugmentersHaveZeroResiduals) {
  auto space = small_space();
  edt::scenes::RenderParams params;
  edt::scenes::NearestDecoder dec(space, params);
  auto data = edt::scenes::render_grid(space, params);
  auto color = oracle_transform<float>(space, dec, 0, 1);
  auto shift = oracle_transform<float>(space, dec, 1, 1);
  std::vector<AugmenterRef> refs{{0, 1, color.get()}, {1, 1, shift.get()}};
  std::vector<CellId> cells;
  for (CellId c = 0; c < space.grid_size(); ++c) cells.push_back(c);
  std::vector<FactorTuple> labels;
  for (auto c : cells) labels.push_back(space.tuple_of(c));
  auto rep = law_report(space, dec, refs, images_of(data, cells), labels);
  EXPECT_LE(rep.oracle_gap, 1e-12);
  EXPECT_LE(rep.compositionality, 1e-12);
  EXPECT_LE(rep.commutativity, 1e-12);
  for (const auto& a : rep.augmenters) {
    EXPECT_DOUBLE_EQ(a.target_accuracy, 1.0);
    for (double d : a.drift) EXPECT_EQ(d, 0.0);
  }
  for (double l : rep.leakage) EXPECT_EQ(l, 0.0);
}

TEST(Training, ConstantAugmenterLeaksIntoEveryOtherFactor) {
  auto space = ProductLabelSpace({make_factor("color", FactorKind::Cyclic, 5),
                                  make_factor("shape", FactorKind::Categorical, 3),
                                  make_factor("pos_x", FactorKind::Ordinal, 8)});
  edt::scenes::RenderParams params;
  edt::scenes::NearestDecoder dec(space, params);
  auto data = edt::scenes::render_grid(space, params);
  // Always outputs the image of cell 0, whatever the input.
  auto fixed = dec.image_of(0);
  FunctionTransform<float> constant(
      [fixed](const Matrix<float>& x) {
        Matrix<float> out(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r)
          for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = fixed[static_cast<std::size_t>(c)];
        return out;
      },
      0);
  std::vector<AugmenterRef> refs{{0, 1, &constant}};
  std::vector<CellId> cells;
  for (CellId c = 0; c < space.grid_size(); ++c) cells.push_back(c);
  std::vector<FactorTuple> labels;
  for (auto c : cells) labels.push_back(space.tuple_of(c));
  auto rep = law_report(space, dec, refs, images_of(data, cells), labels);
  ASSERT_EQ(rep.augmenters.size(), 1u);
  const auto& a = rep.augmenters[0];
  EXPECT_EQ(a.drift[0], 0.0);
  // every cell whose shape (resp. position) is not 0 moved to 0
  EXPECT_NEAR(a.drift[1], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(a.drift[2], 7.0 / 8.0, 1e-12);
  EXPECT_GT(rep.leakage[1], 0.0);
  EXPECT_GT(rep.leakage[2], 0.0);
  EXPECT_NEAR(a.target_accuracy, 1.0 / 5.0, 1e-12);  // only colour 4 maps to colour 0
  EXPECT_GT(a.composition, 0.0);
}
