#include "edt/training.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "edt/algebra.hpp"

namespace edt::training {

using learn::ImageTransform;
using learn::NetworkTransform;
using learn::PowerTransform;

namespace {

// Salts for the generator streams of one run. Keeping them separate means a
// configuration that skips a term does not shift the draws of the others.
enum Salt : std::uint64_t {
  kAugInit = 1,
  kPairs = 2,
  kRegularizer = 3,
  kPredInit = 11,
  kPredBatch = 12,
  kPredAug = 13,
};

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("invalid EDT config: ") + what);
}

OptimizerState snapshot(const diff::Adam<float>& adam) {
  return {adam.steps(), adam.first_moment(), adam.second_moment()};
}

std::vector<std::size_t> instances_of(const scenes::Dataset& data, std::span<const CellId> cells) {
  std::vector<std::size_t> out;
  out.reserve(cells.size());
  for (CellId c : cells) {
    auto k = data.instance_of(c);
    if (!k) throw TrainingError("dataset has no instance for cell " + std::to_string(c));
    out.push_back(*k);
  }
  return out;
}

void copy_row(const scenes::Dataset& data, std::size_t instance, Matrix<float>& m, Eigen::Index r) {
  auto img = data.image(instance);
  std::copy(img.begin(), img.end(), m.row(r).data());
}

// d(α^{q-p}(z), z) with z = α^p(x): the power relation α^q = α^p evaluated
// with a shared prefix, gradients flowing through both sides.
double relation_loss(const ImageTransform<float>& alpha, algebra::PowerRelation rel, const Matrix<float>& x,
                     diff::PixelDistance d, learn::GradientBook<float>* book, float scale) {
  PowerTransform<float> prefix(alpha, rel.index);
  PowerTransform<float> tail(alpha, rel.period - rel.index);
  ImageTransform<float>::TracePtr tp, tt;
  Matrix<float> z = prefix.apply(x, book ? &tp : nullptr);
  Matrix<float> lhs = tail.apply(z, book ? &tt : nullptr);
  auto loss = diff::pixel_distance(d, lhs, z);
  if (book) {
    Matrix<float> gz = tail.pullback(*tt, loss.grad_a * scale, *book);
    gz += loss.grad_b * scale;
    prefix.pullback(*tp, gz, *book);
  }
  return loss.value;
}

struct ChainPairs {
  std::size_t k;
  std::vector<std::pair<std::size_t, std::size_t>> rows;  // instance pairs
};

struct AugmenterData {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // instance pairs for ℓ0
  algebra::PowerRelation relation;
  std::vector<ChainPairs> chains;
};

void sample_pairs(const scenes::Dataset& data, const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                  std::size_t n, Rng& rng, Matrix<float>& x, Matrix<float>& y) {
  x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(scenes::kImageSize));
  y.resize(x.rows(), x.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const auto& [a, b] = pairs[rng.index(pairs.size())];
    copy_row(data, a, x, static_cast<Eigen::Index>(r));
    copy_row(data, b, y, static_cast<Eigen::Index>(r));
  }
}

double mean_or_zero(double sum, std::size_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

}  // namespace

void validate(const EdtConfig& cfg) {
  for (double l : {cfg.lambda0, cfg.lambda1, cfg.lambda2, cfg.lambda3})
    require(std::isfinite(l) && l >= 0, "loss weights must be finite and >= 0");
  require(std::isfinite(cfg.lr_aug) && cfg.lr_aug > 0, "lr_aug must be > 0");
  require(std::isfinite(cfg.lr_pred) && cfg.lr_pred > 0, "lr_pred must be > 0");
  require(cfg.batch >= 1, "batch must be >= 1");
  require(cfg.reg_batch >= 1, "reg_batch must be >= 1");
  require(cfg.aug_hidden >= 1, "aug_hidden must be >= 1");
  require(!cfg.pred_hidden.empty(), "pred_hidden needs at least one layer");
  for (std::size_t h : cfg.pred_hidden) require(h >= 1, "pred_hidden sizes must be >= 1");
  require(cfg.aug_depth >= 1, "aug_depth must be >= 1");
  require(cfg.log_every >= 1, "log_every must be >= 1");
}

std::string to_json_line(const LogRecord& r) {
  nlohmann::ordered_json j;
  j["iter"] = r.iter;
  j["l0"] = r.l0;
  j["l1"] = r.l1;
  j["l2"] = r.l2;
  j["l3"] = r.l3;
  j["sup"] = r.sup;
  return j.dump();
}

Rng stream(std::uint64_t seed, std::uint64_t salt) { return Rng(seed).split(salt); }

Matrix<float> images_of(const scenes::Dataset& data, std::span<const CellId> cells) {
  const auto inst = instances_of(data, cells);
  Matrix<float> m(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(scenes::kImageSize));
  for (std::size_t r = 0; r < inst.size(); ++r) copy_row(data, inst[r], m, static_cast<Eigen::Index>(r));
  return m;
}

AugmenterRun train_augmenters(const scenes::Dataset& data, const splits::SplitMask& mask,
                              const EdtConfig& cfg) {
  validate(cfg);
  const ProductLabelSpace& space = data.space();
  if (mask.train.size() != space.grid_size()) throw TrainingError("split does not match the roster");

  Rng init_rng = stream(cfg.seed, kAugInit);
  Rng pair_rng = stream(cfg.seed, kPairs);
  Rng reg_rng = stream(cfg.seed, kRegularizer);

  AugmenterRun run;
  std::vector<AugmenterData> info;
  const std::size_t dims[] = {scenes::kImageSize, cfg.aug_hidden, scenes::kImageSize};
  const diff::Activation acts[] = {diff::Activation::Relu, diff::Activation::Sigmoid};

  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    const auto gens = space.generators(i);
    if (gens.empty()) continue;
    bool any = false;
    for (Element g : gens) {
      auto ps = splits::select_pairs(space, mask, i, g);
      if (ps.empty()) continue;
      any = true;
      AugmenterData d;
      for (const auto& [a, b] : ps.pairs) d.pairs.emplace_back(*data.instance_of(a), *data.instance_of(b));
      const auto& m = space.factor(i).monoid();
      d.relation = algebra::power_relation(m, g);
      for (std::size_t k = 2; k <= cfg.chain_max && k < d.relation.period; ++k) {
        auto chain = splits::select_pairs(space, mask, i, algebra::power(m, g, k));
        if (chain.empty()) continue;
        ChainPairs c{k, {}};
        for (const auto& [a, b] : chain.pairs) c.rows.emplace_back(*data.instance_of(a), *data.instance_of(b));
        d.chains.push_back(std::move(c));
      }
      info.push_back(std::move(d));
      run.augmenters.push_back({i, g, diff::Network<float>::glorot(dims, acts, init_rng), {}});
    }
    if (!any) {
      throw TrainingError("factor '" + space.factor(i).name +
                          "' has no training pairs for any generator under this split");
    }
  }

  const std::size_t n_aug = run.augmenters.size();
  std::vector<NetworkTransform<float>> maps;
  std::vector<diff::Adam<float>> adams;
  for (const auto& a : run.augmenters) {
    maps.emplace_back(a.net, a.factor);
    adams.emplace_back(a.net, diff::AdamConfig{cfg.lr_aug});
  }

  std::vector<std::pair<std::size_t, std::size_t>> cross;
  for (std::size_t a = 0; a < n_aug; ++a)
    for (std::size_t b = a + 1; b < n_aug; ++b)
      if (run.augmenters[a].factor != run.augmenters[b].factor) cross.emplace_back(a, b);

  std::size_t n_l1_terms = 0;
  for (const auto& d : info) n_l1_terms += 1 + d.chains.size();

  const auto train_inst = instances_of(data, mask.train_cells());
  const auto d = cfg.distance;
  learn::GradientBook<float> book;
  Matrix<float> x, y, reg(static_cast<Eigen::Index>(cfg.reg_batch), static_cast<Eigen::Index>(scenes::kImageSize));

  for (std::size_t it = 1; it <= cfg.aug_iters; ++it) {
    book.set_zero();
    double l0 = 0, l1 = 0, l2 = 0;

    if (cfg.lambda0 > 0) {
      const float w = static_cast<float>(cfg.lambda0 / static_cast<double>(n_aug));
      for (std::size_t a = 0; a < n_aug; ++a) {
        sample_pairs(data, info[a].pairs, cfg.batch, pair_rng, x, y);
        l0 += learn::loss_l0<float>(maps[a], x, y, d, &book, w);
      }
    }

    if (cfg.lambda1 > 0 || cfg.lambda2 > 0) {
      for (Eigen::Index r = 0; r < reg.rows(); ++r) copy_row(data, train_inst[reg_rng.index(train_inst.size())], reg, r);
    }

    if (cfg.lambda1 > 0) {
      const float w = static_cast<float>(cfg.lambda1 / static_cast<double>(n_l1_terms));
      for (std::size_t a = 0; a < n_aug; ++a) {
        l1 += relation_loss(maps[a], info[a].relation, reg, d, &book, w);
        for (const auto& c : info[a].chains) {
          sample_pairs(data, c.rows, cfg.reg_batch, reg_rng, x, y);
          l1 += learn::loss_l0<float>(PowerTransform<float>(maps[a], c.k), x, y, d, &book, w);
        }
      }
    }

    if (cfg.lambda2 > 0 && !cross.empty()) {
      const float w = static_cast<float>(cfg.lambda2 / static_cast<double>(cross.size()));
      for (const auto& [a, b] : cross) l2 += learn::loss_l2<float>(maps[a], maps[b], reg, d, &book, w);
    }

    for (std::size_t a = 0; a < n_aug; ++a) {
      if (const auto* g = book.find(run.augmenters[a].net)) adams[a].step(run.augmenters[a].net, *g);
    }

    if (it % cfg.log_every == 0) {
      run.log.push_back({it, mean_or_zero(l0, n_aug), mean_or_zero(l1, n_l1_terms),
                         mean_or_zero(l2, cross.size()), 0.0, 0.0});
    }
  }

  for (std::size_t a = 0; a < n_aug; ++a) run.augmenters[a].opt = snapshot(adams[a]);
  return run;
}

PredictorRun train_predictor(const scenes::Dataset& data, const splits::SplitMask& mask,
                             std::span<const Augmenter> augmenters, const EdtConfig& cfg,
                             const scenes::RenderParams& params) {
  validate(cfg);
  const ProductLabelSpace& space = data.space();
  if (mask.train.size() != space.grid_size()) throw TrainingError("split does not match the roster");

  Rng init_rng = stream(cfg.seed, kPredInit);
  Rng batch_rng = stream(cfg.seed, kPredBatch);
  Rng aug_rng = stream(cfg.seed, kPredAug);

  PredictorRun run;
  auto& model = run.predictor.model;
  model = learn::Predictor<float>::init(space, scenes::kImageSize, cfg.pred_hidden, init_rng);
  std::vector<diff::Adam<float>> adams;
  adams.emplace_back(model.trunk, diff::AdamConfig{cfg.lr_pred});
  for (const auto& h : model.heads) adams.emplace_back(h, diff::AdamConfig{cfg.lr_pred});
  auto grads = learn::PredictorGrads<float>::zeros_like(model);

  const auto train_cells = mask.train_cells();
  if (train_cells.empty()) throw TrainingError("split has no train cells");
  const auto train_inst = instances_of(data, train_cells);

  // Augmentation sources: (factor, generator) for every augmenter, or for
  // every factor generator when the exact action is used.
  const bool augment = augments_predictor(cfg);
  std::vector<learn::ActionStep> sources;
  std::vector<NetworkTransform<float>> maps;
  if (augment) {
    if (cfg.oracle) {
      scenes::validate_renderable(space, params);
      for (std::size_t i = 0; i < space.num_factors(); ++i)
        for (Element g : space.generators(i)) sources.push_back({i, g});
    } else {
      for (const auto& a : augmenters) {
        sources.push_back({a.factor, a.element});
        maps.emplace_back(a.net, a.factor);
      }
    }
    if (sources.empty()) throw TrainingError("augmentation requested but no augmenters are available");
  }

  // With one step per sample every augmented input is α(train image), so the
  // learned maps are evaluated once up front.
  std::vector<Matrix<float>> cached;
  if (augment && !cfg.oracle && cfg.aug_depth == 1) {
    const Matrix<float> all = images_of(data, train_cells);
    for (const auto& m : maps) cached.push_back(m(all));
  }

  const Eigen::Index img = static_cast<Eigen::Index>(scenes::kImageSize);
  Matrix<float> x(static_cast<Eigen::Index>(cfg.batch), img), xa(x.rows(), img);
  std::vector<std::size_t> picks(cfg.batch);
  std::vector<FactorTuple> labels(cfg.batch), moved(cfg.batch);

  for (std::size_t it = 1; it <= cfg.pred_iters; ++it) {
    grads.set_zero();
    for (std::size_t r = 0; r < cfg.batch; ++r) {
      picks[r] = batch_rng.index(train_inst.size());
      copy_row(data, train_inst[picks[r]], x, static_cast<Eigen::Index>(r));
      labels[r] = data.labels(train_inst[picks[r]]);
    }
    const double sup = learn::supervised_loss<float>(space, model, x, labels, &grads).total;

    double l3 = 0;
    if (augment) {
      const std::size_t depth = 1 + aug_rng.index(cfg.aug_depth);
      std::vector<std::size_t> chosen(depth);
      for (auto& c : chosen) c = aug_rng.index(sources.size());
      moved = labels;
      for (auto& yv : moved)
        for (std::size_t c : chosen) yv = factors::act_factor(space, sources[c].factor, sources[c].element, yv);

      if (cfg.oracle) {
        for (std::size_t r = 0; r < cfg.batch; ++r) {
          const auto im = scenes::render(space, params, moved[r]);
          std::copy(im.pixels.begin(), im.pixels.end(), xa.row(static_cast<Eigen::Index>(r)).data());
        }
        l3 = learn::supervised_loss<float>(space, model, xa, moved, &grads, static_cast<float>(cfg.lambda3)).total;
      } else if (!cached.empty()) {
        for (std::size_t r = 0; r < cfg.batch; ++r)
          xa.row(static_cast<Eigen::Index>(r)) = cached[chosen[0]].row(static_cast<Eigen::Index>(picks[r]));
        l3 = learn::supervised_loss<float>(space, model, xa, moved, &grads, static_cast<float>(cfg.lambda3)).total;
      } else {
        std::vector<learn::ActionStep> steps;
        std::vector<std::unique_ptr<ImageTransform<float>>> chain;
        const ImageTransform<float>* aug = &maps[chosen[0]];
        steps.push_back(sources[chosen[0]]);
        for (std::size_t s = 1; s < depth; ++s) {
          chain.push_back(std::make_unique<learn::ComposedTransform<float>>(maps[chosen[s]], *aug));
          aug = chain.back().get();
          steps.push_back(sources[chosen[s]]);
        }
        l3 = learn::loss_l3<float>(space, model, *aug, steps, x, labels, &grads,
                                   static_cast<float>(cfg.lambda3)).total;
      }
    }

    adams[0].step(model.trunk, grads.trunk);
    for (std::size_t h = 0; h < model.heads.size(); ++h) adams[h + 1].step(model.heads[h], grads.heads[h]);

    if (it % cfg.log_every == 0) run.log.push_back({it, 0.0, 0.0, 0.0, l3, sup});
  }

  run.predictor.opt.push_back(snapshot(adams[0]));
  for (std::size_t h = 0; h < model.heads.size(); ++h) run.predictor.opt.push_back(snapshot(adams[h + 1]));
  return run;
}

LawReport law_report(const ProductLabelSpace& space, const scenes::NearestDecoder& decoder,
                     std::span<const AugmenterRef> augmenters, const Matrix<float>& x,
                     std::span<const FactorTuple> labels, diff::PixelDistance d) {
  if (static_cast<std::size_t>(x.rows()) != labels.size() || labels.empty())
    throw std::invalid_argument("law_report: need a non-empty labelled batch");
  LawReport rep;
  const std::size_t nf = space.num_factors();
  std::vector<double> leak_sum(nf, 0.0);
  std::vector<std::size_t> leak_n(nf, 0);
  const Eigen::Index img = x.cols();

  for (const auto& ref : augmenters) {
    AugmenterLaws laws;
    laws.factor = ref.factor;
    laws.element = ref.element;
    laws.drift.assign(nf, 0.0);

    Matrix<float> out = (*ref.map)(x);
    Matrix<float> target(x.rows(), img);
    std::size_t hits = 0;
    std::vector<float> row(static_cast<std::size_t>(img));
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const FactorTuple expect = factors::act_factor(space, ref.factor, ref.element, labels[r]);
      auto t = decoder.image_of(space.cell_of(expect));
      std::copy(t.begin(), t.end(), target.row(static_cast<Eigen::Index>(r)).data());
      std::copy(out.row(static_cast<Eigen::Index>(r)).data(), out.row(static_cast<Eigen::Index>(r)).data() + img,
                row.begin());
      const FactorTuple got = space.tuple_of(decoder.decode(row));
      if (got[ref.factor] == expect[ref.factor]) ++hits;
      for (std::size_t j = 0; j < nf; ++j)
        if (j != ref.factor && got[j] != labels[r][j]) laws.drift[j] += 1.0;
    }
    for (std::size_t j = 0; j < nf; ++j) {
      laws.drift[j] /= static_cast<double>(labels.size());
      if (j != ref.factor) {
        leak_sum[j] += laws.drift[j];
        ++leak_n[j];
      }
    }
    laws.target_accuracy = static_cast<double>(hits) / static_cast<double>(labels.size());
    laws.oracle_gap = diff::pixel_distance(d, out, target).value;

    const auto rel = algebra::power_relation(space.factor(ref.factor).monoid(), ref.element);
    laws.composition = relation_loss(*ref.map, rel, x, d, nullptr, 1.0f);
    rep.augmenters.push_back(std::move(laws));
  }

  std::size_t pairs = 0;
  for (std::size_t a = 0; a < augmenters.size(); ++a) {
    for (std::size_t b = a + 1; b < augmenters.size(); ++b) {
      if (augmenters[a].factor == augmenters[b].factor) continue;
      rep.commutativity += learn::loss_l2<float>(*augmenters[a].map, *augmenters[b].map, x, d);
      ++pairs;
    }
  }
  rep.commutativity = mean_or_zero(rep.commutativity, pairs);
  for (const auto& l : rep.augmenters) {
    rep.oracle_gap += l.oracle_gap;
    rep.compositionality += l.composition;
  }
  rep.oracle_gap = mean_or_zero(rep.oracle_gap, rep.augmenters.size());
  rep.compositionality = mean_or_zero(rep.compositionality, rep.augmenters.size());
  rep.leakage.resize(nf);
  for (std::size_t j = 0; j < nf; ++j) rep.leakage[j] = mean_or_zero(leak_sum[j], leak_n[j]);
  return rep;
}

LawReport law_report(const scenes::Dataset& data, const scenes::NearestDecoder& decoder,
                     std::span<const Augmenter> augmenters, std::span<const CellId> cells,
                     diff::PixelDistance d) {
  std::vector<NetworkTransform<float>> maps;
  maps.reserve(augmenters.size());
  std::vector<AugmenterRef> refs;
  for (const auto& a : augmenters) {
    maps.emplace_back(a.net, a.factor);
    refs.push_back({a.factor, a.element, &maps.back()});
  }
  std::vector<FactorTuple> labels;
  for (CellId c : cells) labels.push_back(data.space().tuple_of(c));
  return law_report(data.space(), decoder, refs, images_of(data, cells), labels, d);
}

}  // namespace edt::training
