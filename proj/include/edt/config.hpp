#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edt/eval.hpp"
#include "edt/factors.hpp"
#include "edt/scenes.hpp"
#include "edt/splits.hpp"
#include "edt/training.hpp"

namespace edt::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a command needs, read from `key = value` lines ('#' starts a
/// comment). Unknown keys are rejected.
struct RunConfig {
  std::string roster = "color:cyclic:5,shape:categorical:3,scale:ordinal:3,pos_x:ordinal:8,pos_y:ordinal:8";
  std::string palette;  // empty: default palette; otherwise "r g b; r g b; ..." (up to 5 colours)
  splits::SplitSpec split;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<eval::Arm> arms{eval::Arm::Erm, eval::Arm::EdtL0L3, eval::Arm::EdtFull, eval::Arm::EdtOracle};
  std::size_t workers = 1;
  std::size_t law_cells = 128;
  training::EdtConfig edt;
  std::string dataset;  // empty: <out>/dataset.edt1
  std::string out = "out";
};

/// Applies one assignment; throws ConfigError for unknown keys or bad values.
void apply(RunConfig& cfg, std::string_view key, std::string_view value);
RunConfig parse_config(std::istream& in, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

/// Canonical `key = value` listing of every field, in a fixed order.
std::string echo(const RunConfig& cfg);
/// FNV-1a of the echo without the path fields, so moving outputs around does
/// not change it.
std::uint64_t digest(const RunConfig& cfg);
std::string digest_hex(std::uint64_t d);

/// "name:kind:cardinality" entries separated by commas.
factors::ProductLabelSpace parse_roster(std::string_view text);
std::string format_roster(const factors::ProductLabelSpace& space);

scenes::RenderParams render_params(const RunConfig& cfg);
eval::AblationConfig ablation_config(const RunConfig& cfg);

}  // namespace edt::config
