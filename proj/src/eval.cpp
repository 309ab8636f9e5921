#include "edt/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

namespace edt::eval {

std::string_view to_string(Side s) { return s == Side::Train ? "train" : "test"; }

const FactorMetric* MetricsRecord::find(std::string_view factor) const {
  for (const auto& m : metrics)
    if (m.factor == factor) return &m;
  return nullptr;
}

std::vector<FactorMetric> score(const ProductLabelSpace& space,
                                const std::vector<std::vector<double>>& predictions,
                                std::span<const FactorTuple> truth) {
  if (truth.empty()) throw std::invalid_argument("score: nothing to evaluate");
  if (predictions.size() != space.num_factors()) throw std::invalid_argument("score: one prediction row per factor");
  std::vector<FactorMetric> out;
  const double n = static_cast<double>(truth.size());
  for (std::size_t i = 0; i < space.num_factors(); ++i) {
    const auto& f = space.factor(i);
    if (predictions[i].size() != truth.size()) throw std::invalid_argument("score: prediction count mismatch");
    FactorMetric m{f.name, f.is_classified(), 0.0};
    double acc = 0;
    for (std::size_t r = 0; r < truth.size(); ++r) {
      if (f.is_classified()) {
        acc += predictions[i][r] != static_cast<double>(truth[r][i]) ? 1.0 : 0.0;
      } else {
        const double e = predictions[i][r] - learn::ordinal_target(truth[r][i], f.cardinality);
        acc += e * e;
      }
    }
    m.value = 100.0 * acc / n;
    out.push_back(std::move(m));
  }
  return out;
}

MetricsRecord evaluate(const learn::Predictor<float>& predictor, const scenes::Dataset& data,
                       const splits::SplitMask& mask, Side side) {
  const auto cells = side == Side::Train ? mask.train_cells() : mask.test_cells();
  if (cells.empty()) throw std::invalid_argument("evaluate: the " + std::string(to_string(side)) + " side is empty");
  const auto& space = data.space();
  std::vector<std::vector<double>> preds(space.num_factors());
  std::vector<FactorTuple> truth;
  constexpr std::size_t kChunk = 256;
  for (std::size_t lo = 0; lo < cells.size(); lo += kChunk) {
    const std::size_t hi = std::min(cells.size(), lo + kChunk);
    std::span<const factors::CellId> part(cells.data() + lo, hi - lo);
    auto p = learn::predict<float>(space, predictor, training::images_of(data, part));
    for (std::size_t i = 0; i < p.size(); ++i) preds[i].insert(preds[i].end(), p[i].begin(), p[i].end());
    for (auto c : part) truth.push_back(space.tuple_of(c));
  }
  MetricsRecord rec;
  rec.split = mask.scheme;
  rec.seed = mask.seed;
  rec.side = side;
  rec.count = cells.size();
  rec.metrics = score(space, preds, truth);
  return rec;
}

std::string to_json_line(const MetricsRecord& m, std::uint64_t config_digest) {
  nlohmann::ordered_json j;
  j["arm"] = m.arm;
  j["split"] = m.split;
  j["seed"] = m.seed;
  j["side"] = std::string(to_string(m.side));
  j["count"] = m.count;
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(config_digest));
  j["config_digest"] = digest;
  nlohmann::ordered_json metrics;
  for (const auto& f : m.metrics) {
    metrics[f.factor] = {{"metric", f.is_rate ? "error_pct" : "mse_x100"}, {"value", f.value}};
  }
  j["metrics"] = metrics;
  return j.dump();
}

std::string_view display_name(Arm a) {
  switch (a) {
    case Arm::Erm: return "ERM";
    case Arm::EdtL0L3: return "EDT(l0,l3)";
    case Arm::EdtFull: return "EDT(l0,l1,l2,l3)";
    case Arm::EdtOracle: return "EDT-oracle";
  }
  return "?";
}

std::string_view key(Arm a) {
  switch (a) {
    case Arm::Erm: return "erm";
    case Arm::EdtL0L3: return "edt-l0l3";
    case Arm::EdtFull: return "edt";
    case Arm::EdtOracle: return "edt-oracle";
  }
  return "?";
}

Arm parse_arm(std::string_view text) {
  for (Arm a : {Arm::Erm, Arm::EdtL0L3, Arm::EdtFull, Arm::EdtOracle})
    if (text == key(a)) return a;
  throw std::invalid_argument("unknown arm '" + std::string(text) + "' (erm, edt-l0l3, edt, edt-oracle)");
}

std::vector<Arm> parse_arms(std::string_view list) {
  std::vector<Arm> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    auto item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    out.push_back(parse_arm(item));
    pos = comma + 1;
  }
  return out;
}

training::EdtConfig arm_config(Arm a, const training::EdtConfig& base) {
  training::EdtConfig c = base;
  switch (a) {
    case Arm::Erm:
      c.lambda0 = c.lambda1 = c.lambda2 = c.lambda3 = 0;
      c.use_aug = false;
      c.oracle = false;
      break;
    case Arm::EdtL0L3:
      c.lambda1 = c.lambda2 = 0;
      c.oracle = false;
      break;
    case Arm::EdtFull:
      c.oracle = false;
      break;
    case Arm::EdtOracle:
      c.oracle = true;
      break;
  }
  return c;
}

bool trains_augmenters(Arm a) { return a == Arm::EdtL0L3 || a == Arm::EdtFull; }

std::vector<ArmSummary> summarize(std::span<const RunResult> runs, std::span<const Arm> arms) {
  std::vector<ArmSummary> out;
  for (Arm a : arms) {
    ArmSummary s;
    s.arm = a;
    std::vector<std::vector<double>> values;
    for (const auto& r : runs) {
      if (r.arm != a) continue;
      if (r.failed) {
        s.failed = true;
        continue;
      }
      if (s.columns.empty()) {
        for (const auto& m : r.test.metrics) s.columns.push_back(m.factor);
        values.resize(s.columns.size());
      }
      for (std::size_t k = 0; k < s.columns.size(); ++k) values[k].push_back(r.test.metrics.at(k).value);
      ++s.runs;
    }
    for (const auto& v : values) {
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0;
      for (double x : v) ss += (x - mean) * (x - mean);
      s.mean.push_back(mean);
      s.stddev.push_back(v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

const ArmSummary* find_arm(std::span<const ArmSummary> table, Arm a) {
  for (const auto& s : table)
    if (s.arm == a && !s.failed && s.runs > 0) return &s;
  return nullptr;
}

std::optional<double> column_mean(const ArmSummary& s, std::string_view col) {
  for (std::size_t k = 0; k < s.columns.size(); ++k)
    if (s.columns[k] == col) return s.mean[k];
  return std::nullopt;
}

}  // namespace

std::vector<OrderingCheck> check_ordering(std::span<const ArmSummary> table) {
  std::vector<OrderingCheck> out;
  const ArmSummary* erm = find_arm(table, Arm::Erm);
  const ArmSummary* l0l3 = find_arm(table, Arm::EdtL0L3);
  const ArmSummary* full = find_arm(table, Arm::EdtFull);
  const ArmSummary* oracle = find_arm(table, Arm::EdtOracle);
  for (std::string_view col : {"shape", "pos_x", "pos_y"}) {
    if (full && l0l3 && erm) {
      auto a = column_mean(*full, col), b = column_mean(*l0l3, col), c = column_mean(*erm, col);
      if (a && b && c) {
        out.push_back({std::string(col) + ": EDT(l0,l1,l2,l3) < EDT(l0,l3) < ERM", *a < *b && *b < *c});
      }
    }
    if (oracle) {
      auto o = column_mean(*oracle, col);
      if (!o) continue;
      bool holds = true;
      for (const ArmSummary* s : {erm, l0l3, full}) {
        if (!s) continue;
        auto v = column_mean(*s, col);
        if (v && *o > *v) holds = false;
      }
      out.push_back({std::string(col) + ": EDT-oracle <= every learned arm", holds});
    }
  }
  return out;
}

std::string format_cell(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f)", mean, stddev);
  return buf;
}

std::string render_table(std::span<const ArmSummary> table) {
  std::vector<std::string> columns;
  for (const auto& s : table)
    if (!s.columns.empty()) {
      columns = s.columns;
      break;
    }
  std::vector<std::size_t> best(columns.size(), table.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    for (std::size_t a = 0; a < table.size(); ++a) {
      if (table[a].failed || table[a].runs == 0) continue;
      if (best[k] == table.size() || table[a].mean[k] < table[best[k]].mean[k]) best[k] = a;
    }
  }

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"arm"});
  for (const auto& c : columns) rows[0].push_back(c);
  for (std::size_t a = 0; a < table.size(); ++a) {
    std::vector<std::string> row{std::string(display_name(table[a].arm))};
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (table[a].failed || table[a].runs == 0) {
        row.push_back("failed");
      } else {
        row.push_back(format_cell(table[a].mean[k], table[a].stddev[k]) + (best[k] == a ? " *" : ""));
      }
    }
    if (columns.empty()) row.push_back(table[a].failed ? "failed" : "");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t k = 0; k < r.size() && k < width.size(); ++k) width[k] = std::max(width[k], r[k].size());
  std::ostringstream os;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size() && k < width.size(); ++k) {
      os << r[k] << std::string(width[k] - r[k].size() + (k + 1 < r.size() ? 2 : 0), ' ');
    }
    os << '\n';
  }
  return os.str();
}

namespace {

RunResult run_job(const scenes::Dataset& data, const AblationConfig& cfg, Arm arm, std::uint64_t seed) {
  RunResult r;
  r.arm = arm;
  r.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto& space = data.space();
    const splits::SplitMask mask = splits::make_split(space, cfg.split, seed);
    training::EdtConfig ec = arm_config(arm, cfg.base);
    ec.seed = seed;
    std::vector<training::Augmenter> augs;
    if (trains_augmenters(arm)) augs = training::train_augmenters(data, mask, ec).augmenters;
    const auto pred = training::train_predictor(data, mask, augs, ec, cfg.params);
    r.train = evaluate(pred.predictor.model, data, mask, Side::Train);
    r.test = evaluate(pred.predictor.model, data, mask, Side::Test);
    for (auto* m : {&r.train, &r.test}) m->arm = std::string(key(arm));
    if (!augs.empty() && cfg.law_cells > 0) {
      auto cells = mask.train_cells();
      Rng rng = training::stream(seed, 21);
      rng.shuffle(cells);
      cells.resize(std::min(cells.size(), cfg.law_cells));
      std::sort(cells.begin(), cells.end());
      const scenes::NearestDecoder decoder(space, cfg.params);
      r.laws = training::law_report(data, decoder, augs, cells);
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

AblationResult run_ablation(const scenes::Dataset& data, const AblationConfig& cfg) {
  {
    auto s = cfg.seeds;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw std::invalid_argument("ablation seeds must be distinct");
  }
  training::validate(cfg.base);
  struct Job {
    Arm arm;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto seed : cfg.seeds)
    for (Arm a : cfg.arms) jobs.push_back({a, seed});

  AblationResult out;
  out.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) out.runs[k] = run_job(data, cfg, jobs[k].arm, jobs[k].seed);
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.workers, jobs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  out.table = summarize(out.runs, cfg.arms);
  return out;
}

}  // namespace edt::eval
