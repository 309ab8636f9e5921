#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "edt/eval.hpp"

using namespace edt::eval;
using edt::factors::FactorKind;
using edt::factors::make_factor;

namespace {

std::vector<std::vector<double>> truth_predictions(const ProductLabelSpace& s, std::span<const FactorTuple> y) {
  std::vector<std::vector<double>> p(s.num_factors());
  for (std::size_t i = 0; i < s.num_factors(); ++i)
    for (const auto& t : y)
      p[i].push_back(s.factor(i).is_classified() ? t[i] : edt::learn::ordinal_target(t[i], s.factor(i).cardinality));
  return p;
}

std::vector<FactorTuple> all_tuples(const ProductLabelSpace& s) {
  std::vector<FactorTuple> y;
  for (edt::factors::CellId c = 0; c < s.grid_size(); ++c) y.push_back(s.tuple_of(c));
  return y;
}

RunResult fake_run(Arm a, std::uint64_t seed, std::vector<double> values) {
  RunResult r;
  r.arm = a;
  r.seed = seed;
  const char* names[] = {"shape", "pos_x", "pos_y"};
  for (std::size_t k = 0; k < values.size(); ++k) r.test.metrics.push_back({names[k], k == 0, values[k]});
  return r;
}

}  // namespace

TEST(Eval, TrueLabelsScoreZero) {
  auto s = edt::factors::default_minisprites_space();
  auto y = all_tuples(s);
  for (const auto& m : score(s, truth_predictions(s, y), y)) EXPECT_EQ(m.value, 0.0) << m.factor;
}

TEST(Eval, ConstantPredictions) {
  auto s = edt::factors::default_minisprites_space();
  auto y = all_tuples(s);
  auto p = truth_predictions(s, y);
  for (auto& v : p[1]) v = 0;  // shape: always class 0
  for (auto& v : p[3]) v = 0;  // pos_x: always the left edge
  auto m = score(s, p, y);
  EXPECT_NEAR(m[1].value, 200.0 / 3.0, 1e-9);
  EXPECT_TRUE(m[1].is_rate);
  // mean of (v / 7)^2 over v = 0..7, times 100
  double expect = 0;
  for (int v = 0; v < 8; ++v) expect += (v / 7.0) * (v / 7.0);
  EXPECT_NEAR(m[3].value, 100.0 * expect / 8.0, 1e-9);
  EXPECT_FALSE(m[3].is_rate);
  EXPECT_EQ(m[0].value, 0.0);
}

TEST(Eval, ScoreIsPermutationInvariant) {
  auto s = edt::factors::default_minisprites_space();
  auto y = all_tuples(s);
  std::mt19937_64 gen(3);
  auto p = truth_predictions(s, y);
  for (auto& row : p)
    for (auto& v : row)
      if (gen() % 3 == 0) v = static_cast<double>(gen() % 3);
  auto base = score(s, p, y);
  std::vector<std::size_t> order(y.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<FactorTuple> y2;
  auto p2 = p;
  for (std::size_t k = 0; k < order.size(); ++k) {
    y2.push_back(y[order[k]]);
    for (std::size_t i = 0; i < p.size(); ++i) p2[i][k] = p[i][order[k]];
  }
  auto shuffled = score(s, p2, y2);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base[i].value, shuffled[i].value, 1e-9);
}

TEST(Eval, ScoreRejectsMismatch) {
  auto s = edt::factors::default_minisprites_space();
  std::vector<FactorTuple> none;
  EXPECT_THROW(score(s, std::vector<std::vector<double>>(5), none), std::invalid_argument);
  auto y = all_tuples(s);
  EXPECT_THROW(score(s, std::vector<std::vector<double>>(4), y), std::invalid_argument);
}

TEST(Eval, EvaluateCountsOneSide) {
  ProductLabelSpace s({make_factor("color", FactorKind::Cyclic, 5), make_factor("pos_x", FactorKind::Ordinal, 10)});
  auto data = edt::scenes::render_grid(s, {});
  auto mask = edt::splits::split_axis(s, 0, 1, 0);
  edt::Rng rng(1);
  const std::size_t hidden[] = {8};
  auto p = edt::learn::Predictor<float>::init(s, edt::scenes::kImageSize, hidden, rng);
  auto te = evaluate(p, data, mask, Side::Test);
  EXPECT_EQ(te.count, 36u);
  EXPECT_EQ(te.side, Side::Test);
  EXPECT_EQ(evaluate(p, data, mask, Side::Train).count, 14u);
  edt::splits::SplitMask full{"rand:0.5", 0, std::vector<std::uint8_t>(50, 1)};
  EXPECT_THROW(evaluate(p, data, full, Side::Test), std::invalid_argument);
}

TEST(Eval, MetricsJsonLine) {
  MetricsRecord m{"edt", "paths:10,30", 2, Side::Test, 12, {{"shape", true, 12.5}, {"pos_x", false, 0.25}}};
  EXPECT_EQ(to_json_line(m, 0xabcULL),
            R"({"arm":"edt","split":"paths:10,30","seed":2,"side":"test","count":12,)"
            R"("config_digest":"0000000000000abc","metrics":{"shape":{"metric":"error_pct","value":12.5},)"
            R"("pos_x":{"metric":"mse_x100","value":0.25}}})");
  ASSERT_NE(m.find("pos_x"), nullptr);
  EXPECT_EQ(m.find("color"), nullptr);
}

TEST(Eval, ArmsAndConfigs) {
  for (Arm a : {Arm::Erm, Arm::EdtL0L3, Arm::EdtFull, Arm::EdtOracle}) EXPECT_EQ(parse_arm(key(a)), a);
  EXPECT_EQ(display_name(Arm::EdtL0L3), "EDT(l0,l3)");
  EXPECT_THROW(parse_arm("gan"), std::invalid_argument);
  EXPECT_EQ(parse_arms("erm,edt").size(), 2u);
  EXPECT_EQ(parse_arms("erm, edt-l0l3 ,edt").size(), 3u);

  edt::training::EdtConfig base;
  auto erm = arm_config(Arm::Erm, base);
  EXPECT_FALSE(edt::training::augments_predictor(erm));
  EXPECT_EQ(erm.lambda3, 0.0);
  auto l0l3 = arm_config(Arm::EdtL0L3, base);
  EXPECT_EQ(l0l3.lambda1, 0.0);
  EXPECT_EQ(l0l3.lambda2, 0.0);
  EXPECT_EQ(l0l3.lambda3, 1.0);
  EXPECT_TRUE(arm_config(Arm::EdtOracle, base).oracle);
  EXPECT_FALSE(trains_augmenters(Arm::EdtOracle));
  EXPECT_TRUE(trains_augmenters(Arm::EdtFull));
}

TEST(Eval, SummaryMatchesBruteForce) {
  std::vector<RunResult> runs;
  std::mt19937_64 gen(9);
  std::vector<std::vector<double>> shape_by_arm(2);
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (int a = 0; a < 2; ++a) {
      const double v = static_cast<double>(gen() % 1000) / 10.0;
      shape_by_arm[a].push_back(v);
      runs.push_back(fake_run(a == 0 ? Arm::Erm : Arm::EdtFull, seed, {v, 1.0, 2.0}));
    }
  const Arm arms[] = {Arm::Erm, Arm::EdtFull};
  auto table = summarize(runs, arms);
  ASSERT_EQ(table.size(), 2u);
  for (int a = 0; a < 2; ++a) {
    const auto& v = shape_by_arm[a];
    double mean = (v[0] + v[1] + v[2] + v[3] + v[4]) / 5;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(table[a].mean[0], mean, 1e-12);
    EXPECT_NEAR(table[a].stddev[0], std::sqrt(ss / 4), 1e-12);
    EXPECT_EQ(table[a].runs, 5u);
    EXPECT_DOUBLE_EQ(table[a].stddev[1], 0.0);
  }
  runs[0].failed = true;
  auto with_failure = summarize(runs, arms);
  EXPECT_TRUE(with_failure[0].failed);
  EXPECT_EQ(with_failure[0].runs, 4u);
}

TEST(Eval, OrderingChecks) {
  std::vector<RunResult> runs{fake_run(Arm::Erm, 0, {50, 3, 3}), fake_run(Arm::EdtL0L3, 0, {45, 2, 4}),
                              fake_run(Arm::EdtFull, 0, {40, 1, 2}), fake_run(Arm::EdtOracle, 0, {30, 1.5, 1})};
  const Arm arms[] = {Arm::Erm, Arm::EdtL0L3, Arm::EdtFull, Arm::EdtOracle};
  auto checks = check_ordering(summarize(runs, arms));
  ASSERT_EQ(checks.size(), 6u);
  EXPECT_TRUE(checks[0].holds);   // shape chain
  EXPECT_TRUE(checks[1].holds);   // shape oracle
  EXPECT_TRUE(checks[2].holds);   // pos_x chain
  EXPECT_FALSE(checks[3].holds);  // pos_x oracle 1.5 > 1
  EXPECT_FALSE(checks[4].holds);  // pos_y chain broken by l0l3
  EXPECT_TRUE(checks[5].holds);
  const Arm two[] = {Arm::Erm, Arm::EdtOracle};
  EXPECT_EQ(check_ordering(summarize(runs, two)).size(), 3u);
}

TEST(Eval, TableFormatting) {
  EXPECT_EQ(format_cell(4.554, 0.2149), "4.55 (0.21)");
  EXPECT_EQ(format_cell(10, 0), "10.00 (0.00)");
  std::vector<RunResult> runs{fake_run(Arm::Erm, 0, {50, 3, 3}), fake_run(Arm::Erm, 1, {52, 3, 3}),
                              fake_run(Arm::EdtOracle, 0, {30, 4, 1}), fake_run(Arm::EdtOracle, 1, {30, 4, 1})};
  const Arm arms[] = {Arm::Erm, Arm::EdtOracle};
  auto text = render_table(summarize(runs, arms));
  EXPECT_NE(text.find("51.00 (1.41)"), std::string::npos);
  EXPECT_NE(text.find("30.00 (0.00) *"), std::string::npos);
  EXPECT_NE(text.find("3.00 (0.00) *"), std::string::npos);
  EXPECT_EQ(text.find("51.00 (1.41) *"), std::string::npos);
  EXPECT_EQ(text.substr(0, 3), "arm");
}

TEST(Eval, AblationRejectsDuplicateSeeds) {
  ProductLabelSpace s({make_factor("color", FactorKind::Cyclic, 5), make_factor("pos_x", FactorKind::Ordinal, 10)});
  auto data = edt::scenes::render_grid(s, {});
  AblationConfig cfg;
  cfg.seeds = {1, 1};
  EXPECT_THROW(run_ablation(data, cfg), std::invalid_argument);
}

TEST(Eval, TinyAblationIsDeterministicAcrossWorkerCounts) {
  ProductLabelSpace s({make_factor("color", FactorKind::Cyclic, 5), make_factor("pos_x", FactorKind::Ordinal, 10)});
  auto data = edt::scenes::render_grid(s, {});
  AblationConfig cfg;
  cfg.split = edt::splits::parse_split_spec("rand:0.5");
  cfg.base.aug_iters = 6;
  cfg.base.pred_iters = 10;
  cfg.base.aug_hidden = 8;
  cfg.base.pred_hidden = {8};
  cfg.base.batch = 4;
  cfg.base.reg_batch = 2;
  cfg.seeds = {0, 1};
  cfg.law_cells = 8;
  auto one = run_ablation(data, cfg);
  cfg.workers = 3;
  auto three = run_ablation(data, cfg);
  ASSERT_EQ(one.runs.size(), 8u);
  for (std::size_t k = 0; k < one.runs.size(); ++k) {
    EXPECT_FALSE(one.runs[k].failed) << one.runs[k].error;
    EXPECT_EQ(to_json_line(one.runs[k].test, 0), to_json_line(three.runs[k].test, 0));
    EXPECT_EQ(one.runs[k].laws.has_value(), trains_augmenters(one.runs[k].arm));
  }
  EXPECT_EQ(render_table(one.table), render_table(three.table));
}
