#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edt/learn.hpp"
#include "edt/scenes.hpp"
#include "edt/splits.hpp"
#include "edt/training.hpp"

namespace edt::eval {

using factors::FactorTuple;
using factors::ProductLabelSpace;

enum class Side { Train, Test };
std::string_view to_string(Side s);

/// Misclassification rate (%) for classified factors; mse x 100 on values
/// normalized by cardinality - 1 for ordinal factors.
struct FactorMetric {
  std::string factor;
  bool is_rate = false;
  double value = 0;
};

struct MetricsRecord {
  std::string arm;
  std::string split;
  std::uint64_t seed = 0;
  Side side = Side::Test;
  std::size_t count = 0;
  std::vector<FactorMetric> metrics;

  const FactorMetric* find(std::string_view factor) const;
};

/// predictions[i][r]: class id (classified) or normalized scalar (ordinal)
/// for factor i on instance r, as produced by learn::predict.
std::vector<FactorMetric> score(const ProductLabelSpace& space,
                                const std::vector<std::vector<double>>& predictions,
                                std::span<const FactorTuple> truth);

/// Scores every cell on one side of the split. Throws if that side is empty.
MetricsRecord evaluate(const learn::Predictor<float>& predictor, const scenes::Dataset& data,
                       const splits::SplitMask& mask, Side side);

std::string to_json_line(const MetricsRecord& m, std::uint64_t config_digest);

enum class Arm { Erm, EdtL0L3, EdtFull, EdtOracle };

/// Row label as printed in tables, e.g. "EDT(l0,l3)".
std::string_view display_name(Arm a);
/// Command-line key: erm, edt-l0l3, edt, edt-oracle.
std::string_view key(Arm a);
Arm parse_arm(std::string_view text);
std::vector<Arm> parse_arms(std::string_view comma_list);

/// The base configuration specialized to one arm. ERM drops augmentation and
/// every EDT weight; EDT(l0,l3) zeroes λ1 and λ2; the oracle arm swaps learned
/// augmenters for the exact action.
training::EdtConfig arm_config(Arm a, const training::EdtConfig& base);
bool trains_augmenters(Arm a);

struct AblationConfig {
  training::EdtConfig base;
  splits::SplitSpec split;
  std::vector<Arm> arms{Arm::Erm, Arm::EdtL0L3, Arm::EdtFull, Arm::EdtOracle};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t workers = 1;
  scenes::RenderParams params;
  std::size_t law_cells = 128;  // train cells sampled for the law report of learned arms
};

struct RunResult {
  Arm arm = Arm::Erm;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  MetricsRecord train, test;
  std::optional<training::LawReport> laws;
  double seconds = 0;
};

struct ArmSummary {
  Arm arm = Arm::Erm;
  std::size_t runs = 0;  // successful runs
  bool failed = false;   // at least one run failed
  std::vector<std::string> columns;
  std::vector<double> mean, stddev;
};

/// Mean and sample (n - 1) standard deviation of every test metric per arm.
std::vector<ArmSummary> summarize(std::span<const RunResult> runs, std::span<const Arm> arms);

struct OrderingCheck {
  std::string description;
  bool holds = false;
};

/// Mean-error orderings over the shape and position columns:
/// EDT(l0..l3) < EDT(l0,l3) < ERM, and the oracle arm at or below every
/// learned arm. Checks whose arms or columns are missing are skipped.
std::vector<OrderingCheck> check_ordering(std::span<const ArmSummary> table);

/// "mean (std)" cells, best arm per column marked with '*'.
std::string render_table(std::span<const ArmSummary> table);

struct AblationResult {
  std::vector<RunResult> runs;  // seed-major, arms in config order
  std::vector<ArmSummary> table;
};

/// Runs every (seed, arm) job, each deterministic and isolated, on
/// cfg.workers threads. Failures are recorded per job.
AblationResult run_ablation(const scenes::Dataset& data, const AblationConfig& cfg);

std::string format_cell(double mean, double stddev);

}  // namespace edt::eval
