#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "edt/io.hpp"

using namespace edt::io;
using edt::factors::FactorKind;
using edt::factors::make_factor;
using edt::training::Augmenter;
using edt::training::TrainedPredictor;

namespace {

edt::factors::ProductLabelSpace small_space() {
  return edt::factors::ProductLabelSpace({make_factor("color", FactorKind::Cyclic, 5),
                                          make_factor("pos_x", FactorKind::Ordinal, 10)});
}

edt::training::EdtConfig tiny() {
  edt::training::EdtConfig cfg;
  cfg.aug_iters = 3;
  cfg.pred_iters = 3;
  cfg.aug_hidden = 8;
  cfg.pred_hidden = {8, 4};
  cfg.batch = 4;
  cfg.reg_batch = 2;
  return cfg;
}

template <class T>
void expect_same(const edt::diff::Network<T>& a, const edt::diff::Network<T>& b) {
  ASSERT_EQ(a.num_layers(), b.num_layers());
  for (std::size_t k = 0; k < a.num_layers(); ++k) {
    EXPECT_EQ(a.layer(k).weight, b.layer(k).weight);
    EXPECT_EQ(a.layer(k).bias, b.layer(k).bias);
    EXPECT_EQ(a.layer(k).activation, b.layer(k).activation);
  }
}

void expect_same(const edt::training::OptimizerState& a, const edt::training::OptimizerState& b) {
  EXPECT_EQ(a.steps, b.steps);
  ASSERT_EQ(a.m.weight.size(), b.m.weight.size());
  for (std::size_t k = 0; k < a.m.weight.size(); ++k) {
    EXPECT_EQ(a.m.weight[k], b.m.weight[k]);
    EXPECT_EQ(a.v.bias[k], b.v.bias[k]);
  }
}

}  // namespace

TEST(Io, DatasetRoundTrip) {
  auto data = edt::scenes::render_grid(small_space(), {});
  std::stringstream ss;
  write_dataset(ss, data);
  auto back = read_dataset(ss);
  ASSERT_EQ(back.size(), data.size());
  EXPECT_EQ(back.all_labels(), data.all_labels());
  EXPECT_EQ(back.pixels(), data.pixels());
  ASSERT_EQ(back.space().num_factors(), 2u);
  EXPECT_EQ(back.space().factor(1).name, "pos_x");
  EXPECT_EQ(back.space().factor(1).kind, FactorKind::Ordinal);
  EXPECT_EQ(back.space().factor(0).cardinality, 5u);
  EXPECT_EQ(ss.str().substr(0, 4), "EDT1");
}

TEST(Io, DatasetRejectsCorruption) {
  auto data = edt::scenes::render_grid(small_space(), {});
  std::stringstream ss;
  write_dataset(ss, data);
  const std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_dataset(truncated), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream wrong(bad);
  EXPECT_THROW(read_dataset(wrong), FormatError);
}

TEST(Io, AugmenterRoundTripKeepsWeightsStateAndProvenance) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  auto mask = edt::splits::split_rand(space, 0.5, 0);
  auto run = edt::training::train_augmenters(data, mask, tiny());
  std::stringstream ss;
  write_augmenters(ss, run.augmenters, {42, 0x1234});
  Provenance p;
  auto back = read_augmenters(ss, &p);
  EXPECT_EQ(p.seed, 42u);
  EXPECT_EQ(p.config_digest, 0x1234u);
  ASSERT_EQ(back.size(), run.augmenters.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    EXPECT_EQ(back[k].factor, run.augmenters[k].factor);
    EXPECT_EQ(back[k].element, run.augmenters[k].element);
    expect_same(back[k].net, run.augmenters[k].net);
    expect_same(back[k].opt, run.augmenters[k].opt);
  }
  // a second write of the loaded models is byte-identical
  std::stringstream again;
  write_augmenters(again, back, p);
  std::stringstream first;
  write_augmenters(first, run.augmenters, {42, 0x1234});
  EXPECT_EQ(again.str(), first.str());
}

TEST(Io, PredictorRoundTrip) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  auto mask = edt::splits::split_rand(space, 0.5, 0);
  auto cfg = tiny();
  cfg.use_aug = false;
  auto run = edt::training::train_predictor(data, mask, {}, cfg);
  std::stringstream ss;
  write_predictor(ss, run.predictor, {7, 9});
  auto back = read_predictor(ss);
  expect_same(back.model.trunk, run.predictor.model.trunk);
  ASSERT_EQ(back.model.heads.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) expect_same(back.model.heads[i], run.predictor.model.heads[i]);
  ASSERT_EQ(back.opt.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) expect_same(back.opt[k], run.predictor.opt[k]);
}

TEST(Io, CheckpointVersionAndKindAreChecked) {
  auto space = small_space();
  auto data = edt::scenes::render_grid(space, {});
  auto mask = edt::splits::split_rand(space, 0.5, 0);
  auto run = edt::training::train_augmenters(data, mask, tiny());
  std::stringstream ss;
  write_augmenters(ss, run.augmenters, {});
  std::string bytes = ss.str();
  ASSERT_EQ(bytes.substr(0, 4), "EDTW");

  std::stringstream as_predictor(bytes);
  EXPECT_THROW(read_predictor(as_predictor), FormatError);

  std::string future = bytes;
  future[4] = static_cast<char>(kCheckpointVersion + 1);  // version is the u32 after the magic
  std::stringstream newer(future);
  try {
    read_augmenters(newer);
    FAIL() << "expected a version error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Io, MissingFileIsAFilesystemError) {
  const auto path = std::filesystem::temp_directory_path() / "edt-io-test-missing.edtw";
  std::filesystem::remove(path);
  EXPECT_THROW(load_augmenters(path), std::filesystem::filesystem_error);
  EXPECT_THROW(load_dataset(path), std::filesystem::filesystem_error);
}

TEST(Io, FileWrappersRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "edt-io-test-dataset.edt1";
  auto data = edt::scenes::render_grid(small_space(), {});
  save_dataset(path, data);
  auto back = load_dataset(path);
  EXPECT_EQ(back.pixels(), data.pixels());
  std::filesystem::remove(path);
}
