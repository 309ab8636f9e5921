#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edt/diffcore.hpp"
#include "edt/factors.hpp"
#include "edt/learn.hpp"
#include "edt/scenes.hpp"
#include "edt/splits.hpp"

namespace edt::training {

using diff::Matrix;
using factors::CellId;
using factors::Element;
using factors::FactorTuple;
using factors::ProductLabelSpace;

struct EdtConfig {
  double lambda0 = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  diff::PixelDistance distance = diff::PixelDistance::Bce;
  double lr_aug = 1e-3;
  double lr_pred = 1e-4;
  std::size_t batch = 32;
  std::size_t reg_batch = 8;           // unpaired images per regularizer term
  std::size_t aug_iters = 10000;
  std::size_t pred_iters = 5000;
  std::size_t aug_hidden = 512;
  std::vector<std::size_t> pred_hidden{256, 64};
  std::size_t chain_max = 3;           // longest k for (y, g^k y) pair chains in ℓ1
  std::size_t aug_depth = 1;           // generator applications per ℓ3 sample
  bool use_aug = true;
  bool oracle = false;                 // exact augmentations instead of learned ones
  std::size_t log_every = 100;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const EdtConfig& cfg);

/// True when predictor training adds the ℓ3 term.
inline bool augments_predictor(const EdtConfig& cfg) { return cfg.use_aug && cfg.lambda3 > 0; }

struct OptimizerState {
  std::uint64_t steps = 0;
  diff::Gradients<float> m, v;
};

struct Augmenter {
  std::size_t factor = 0;
  Element element = 0;
  diff::Network<float> net;
  OptimizerState opt;
};

struct LogRecord {
  std::size_t iter = 0;
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0, sup = 0;
};

std::string to_json_line(const LogRecord& r);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Independent generator stream for one purpose of one run.
Rng stream(std::uint64_t seed, std::uint64_t salt);

/// Rows = images of the given cells, in order.
Matrix<float> images_of(const scenes::Dataset& data, std::span<const CellId> cells);

struct AugmenterRun {
  std::vector<Augmenter> augmenters;
  std::vector<LogRecord> log;
};

/// One augmenter per factor generator, trained on ℓ0 pairs from train cells
/// plus λ1·ℓ1 (power relations of each generator and pair chains) and λ2·ℓ2
/// (every cross-factor pair) on unpaired train images.
AugmenterRun train_augmenters(const scenes::Dataset& data, const splits::SplitMask& mask,
                              const EdtConfig& cfg);

struct TrainedPredictor {
  learn::Predictor<float> model;
  std::vector<OptimizerState> opt;  // trunk first, then heads
};

struct PredictorRun {
  TrainedPredictor predictor;
  std::vector<LogRecord> log;
};

/// Supervised loss on train cells plus λ3·ℓ3 with one (factor, generator)
/// drawn per batch. With cfg.oracle the augmented images are exact renderings
/// and `augmenters` is ignored.
PredictorRun train_predictor(const scenes::Dataset& data, const splits::SplitMask& mask,
                             std::span<const Augmenter> augmenters, const EdtConfig& cfg,
                             const scenes::RenderParams& params = {});

/// Exact action of (factor, element) on images that are renderings: each row
/// is decoded (exact lookup, nearest image otherwise), acted on and re-rendered.
template <class T>
std::unique_ptr<learn::ImageTransform<T>> oracle_transform(const ProductLabelSpace& space,
                                                           const scenes::NearestDecoder& decoder,
                                                           std::size_t factor, Element element) {
  auto fn = [&space, &decoder, factor, element](const Matrix<T>& x) {
    Matrix<T> out(x.rows(), x.cols());
    std::vector<float> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(x(r, c));
      auto exact = decoder.lookup(row);
      const CellId cell = exact ? *exact : decoder.decode(row);
      const FactorTuple moved = factors::act_factor(space, factor, element, space.tuple_of(cell));
      auto img = decoder.image_of(space.cell_of(moved));
      for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = static_cast<T>(img[static_cast<std::size_t>(c)]);
    }
    return out;
  };
  return std::make_unique<learn::FunctionTransform<T>>(fn, factor);
}

struct AugmenterRef {
  std::size_t factor;
  Element element;
  const learn::ImageTransform<float>* map;
};

struct AugmenterLaws {
  std::size_t factor = 0;
  Element element = 0;
  double oracle_gap = 0;          // d(α(x), oracle(x))
  double composition = 0;         // d(α^q(x), α^p(x)) for the generator's power relation
  double target_accuracy = 0;     // decoded target factor equals the acted-on value
  std::vector<double> drift;      // per factor: fraction of decoded labels that moved; target entry 0
};

struct LawReport {
  std::vector<AugmenterLaws> augmenters;
  double oracle_gap = 0;          // means over augmenters
  double compositionality = 0;
  double commutativity = 0;       // mean over cross-factor augmenter pairs
  std::vector<double> leakage;    // per factor: mean drift over augmenters of other factors
};

LawReport law_report(const ProductLabelSpace& space, const scenes::NearestDecoder& decoder,
                     std::span<const AugmenterRef> augmenters, const Matrix<float>& x,
                     std::span<const FactorTuple> labels,
                     diff::PixelDistance d = diff::PixelDistance::Mse);

LawReport law_report(const scenes::Dataset& data, const scenes::NearestDecoder& decoder,
                     std::span<const Augmenter> augmenters, std::span<const CellId> cells,
                     diff::PixelDistance d = diff::PixelDistance::Mse);

}  // namespace edt::training
