#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edt/factors.hpp"

namespace edt::splits {

using factors::CellId;
using factors::Element;
using factors::ProductLabelSpace;

/// Train/test membership over the combination grid.
struct SplitMask {
  std::string scheme;  // e.g. "axis", "step:3", "rand:0.5", "paths:10,30"
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> train;  // one flag per cell

  bool in_train(CellId c) const { return train.at(c) != 0; }
  std::size_t train_count() const;
  std::size_t test_count() const { return train.size() - train_count(); }
  std::vector<CellId> train_cells() const;
  std::vector<CellId> test_cells() const;
};

/// Every value of every factor occurs in at least one train cell.
bool covers_all_values(const ProductLabelSpace& space, const SplitMask& mask);

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Train = {domain == 0} ∪ {label == 0}; other factors fully enumerated.
SplitMask split_axis(const ProductLabelSpace& space, std::size_t domain_factor,
                     std::size_t label_factor, std::uint64_t seed);

/// Staircase: domain value d keeps labels (d * stride + k) mod L for k < block,
/// stride = ceil(L / D). On 5 domains x 10 labels the stride is 2.
SplitMask split_step(const ProductLabelSpace& space, std::size_t domain_factor,
                     std::size_t label_factor, std::size_t block, std::uint64_t seed);

/// ceil(rho * |grid|) uniformly drawn cells. Coverage is repaired by swapping a
/// missing-value cell in for a train cell whose removal keeps coverage, so the
/// count stays exact whenever such a swap exists.
SplitMask split_rand(const ProductLabelSpace& space, double rho, std::uint64_t seed);

struct PathSplit {
  SplitMask mask;
  std::vector<std::vector<CellId>> walks;
  std::size_t repair_cells = 0;
};

/// Union of n_paths random walks of path_len steps; each step sets one
/// uniformly chosen factor to a uniformly chosen different value. Missing
/// values are then repaired by adding cells.
PathSplit split_paths_traced(const ProductLabelSpace& space, std::size_t n_paths,
                             std::size_t path_len, std::uint64_t seed);
SplitMask split_paths(const ProductLabelSpace& space, std::size_t n_paths,
                      std::size_t path_len, std::uint64_t seed);

enum class Scheme { Axis, Step, Rand, Paths };

struct SplitSpec {
  Scheme scheme = Scheme::Paths;
  double rho = 0.5;
  std::size_t block = 3;
  std::size_t n_paths = 10;
  std::size_t path_len = 30;
  std::size_t domain_factor = 0;
  std::size_t label_factor = 1;
};

/// Parses "axis", "step[:block]", "rand:<rho>", "paths:<n>,<len>".
SplitSpec parse_split_spec(const std::string& text);
std::string format_split_spec(const SplitSpec& spec);
SplitMask make_split(const ProductLabelSpace& space, const SplitSpec& spec, std::uint64_t seed);

/// Pairs (y, act_factor(i, a, y)) used to learn one augmenter.
struct PairSet {
  std::size_t factor = 0;
  Element element = 0;
  std::vector<std::pair<CellId, CellId>> pairs;

  bool empty() const { return pairs.empty(); }
};

/// All ordered pairs with both endpoints in train, including saturation fixed
/// points (y, y). An empty result is not an error; callers skip that augmenter.
PairSet select_pairs(const ProductLabelSpace& space, const SplitMask& mask, std::size_t i,
                     Element a);

// "SPLIT scheme seed" followed by one train cell id per line.
void write_split_text(std::ostream& out, const SplitMask& mask);
SplitMask read_split_text(std::istream& in, std::size_t grid_size);

}  // namespace edt::splits
