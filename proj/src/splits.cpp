#include "edt/splits.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "edt/rng.hpp"

namespace edt::splits {

using factors::FactorTuple;

std::size_t SplitMask::train_count() const {
  return static_cast<std::size_t>(std::count(train.begin(), train.end(), std::uint8_t{1}));
}

std::vector<CellId> SplitMask::train_cells() const {
  std::vector<CellId> out;
  for (CellId c = 0; c < train.size(); ++c)
    if (train[c]) out.push_back(c);
  return out;
}

std::vector<CellId> SplitMask::test_cells() const {
  std::vector<CellId> out;
  for (CellId c = 0; c < train.size(); ++c)
    if (!train[c]) out.push_back(c);
  return out;
}

namespace {

// counts[i][v] = number of train cells whose factor i equals v.
std::vector<std::vector<std::size_t>> value_counts(const ProductLabelSpace& space,
                                                   const SplitMask& mask) {
  std::vector<std::vector<std::size_t>> counts(space.num_factors());
  for (std::size_t i = 0; i < space.num_factors(); ++i)
    counts[i].assign(space.factor(i).cardinality, 0);
  for (CellId c = 0; c < mask.train.size(); ++c) {
    if (!mask.train[c]) continue;
    const FactorTuple y = space.tuple_of(c);
    for (std::size_t i = 0; i < y.size(); ++i) ++counts[i][y[i]];
  }
  return counts;
}

// First (factor, value) absent from train, in factor-major order.
std::optional<std::pair<std::size_t, std::uint32_t>> first_missing(
    const std::vector<std::vector<std::size_t>>& counts) {
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::uint32_t v = 0; v < counts[i].size(); ++v)
      if (counts[i][v] == 0) return std::make_pair(i, v);
  return std::nullopt;
}

SplitMask empty_mask(const ProductLabelSpace& space, std::string scheme, std::uint64_t seed) {
  return SplitMask{std::move(scheme), seed, std::vector<std::uint8_t>(space.grid_size(), 0)};
}

void check_two_factors(const ProductLabelSpace& space, std::size_t d, std::size_t l) {
  if (d >= space.num_factors() || l >= space.num_factors())
    throw SplitError("designated factor index out of range");
  if (d == l) throw SplitError("domain and label factor must differ");
}

std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

bool covers_all_values(const ProductLabelSpace& space, const SplitMask& mask) {
  return !first_missing(value_counts(space, mask)).has_value();
}

SplitMask split_axis(const ProductLabelSpace& space, std::size_t domain_factor,
                     std::size_t label_factor, std::uint64_t seed) {
  check_two_factors(space, domain_factor, label_factor);
  SplitMask mask = empty_mask(space, "axis", seed);
  for (CellId c = 0; c < space.grid_size(); ++c) {
    const FactorTuple y = space.tuple_of(c);
    if (y[domain_factor] == 0 || y[label_factor] == 0) mask.train[c] = 1;
  }
  return mask;
}

SplitMask split_step(const ProductLabelSpace& space, std::size_t domain_factor,
                     std::size_t label_factor, std::size_t block, std::uint64_t seed) {
  check_two_factors(space, domain_factor, label_factor);
  const std::size_t domains = space.factor(domain_factor).cardinality;
  const std::size_t labels = space.factor(label_factor).cardinality;
  if (block == 0 || block > labels) throw SplitError("step block must be in [1, label cardinality]");
  const std::size_t stride = (labels + domains - 1) / domains;

  SplitMask mask = empty_mask(space, "step:" + std::to_string(block), seed);
  for (CellId c = 0; c < space.grid_size(); ++c) {
    const FactorTuple y = space.tuple_of(c);
    const std::size_t offset = (y[label_factor] + labels - (y[domain_factor] * stride) % labels) % labels;
    if (offset < block) mask.train[c] = 1;
  }
  if (!covers_all_values(space, mask)) {
    throw SplitError("step block " + std::to_string(block) + " with stride " +
                     std::to_string(stride) + " does not cover every label");
  }
  return mask;
}

SplitMask split_rand(const ProductLabelSpace& space, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw SplitError("rand ratio must lie in (0, 1)");
  const std::size_t n = space.grid_size();
  // The epsilon keeps products like 0.7 * 50 from rounding up to 36.
  const auto k = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
  std::size_t needed = 1;
  for (const auto& f : space.factors()) needed = std::max<std::size_t>(needed, f.cardinality);
  if (k < needed) {
    throw SplitError("rand ratio " + format_double(rho) + " gives " + std::to_string(k) +
                     " cells, fewer than the " + std::to_string(needed) + " needed for coverage");
  }

  Rng rng(seed);
  std::vector<CellId> order(n);
  for (CellId c = 0; c < n; ++c) order[c] = c;
  rng.shuffle(order);

  SplitMask mask = empty_mask(space, "rand:" + format_double(rho), seed);
  for (std::size_t j = 0; j < k; ++j) mask.train[order[j]] = 1;

  auto counts = value_counts(space, mask);
  while (auto missing = first_missing(counts)) {
    const auto [i, v] = *missing;
    std::vector<CellId> candidates;
    for (CellId c = 0; c < n; ++c)
      if (!mask.train[c] && space.tuple_of(c)[i] == v) candidates.push_back(c);
    const CellId added = candidates[rng.index(candidates.size())];
    mask.train[added] = 1;
    FactorTuple ya = space.tuple_of(added);
    for (std::size_t f = 0; f < ya.size(); ++f) ++counts[f][ya[f]];

    std::vector<CellId> removable;
    for (CellId c = 0; c < n; ++c) {
      if (!mask.train[c] || c == added) continue;
      const FactorTuple y = space.tuple_of(c);
      bool ok = true;
      for (std::size_t f = 0; f < y.size() && ok; ++f) ok = counts[f][y[f]] >= 2;
      if (ok) removable.push_back(c);
    }
    if (removable.empty()) continue;
    const CellId removed = removable[rng.index(removable.size())];
    mask.train[removed] = 0;
    const FactorTuple yr = space.tuple_of(removed);
    for (std::size_t f = 0; f < yr.size(); ++f) --counts[f][yr[f]];
  }
  return mask;
}

PathSplit split_paths_traced(const ProductLabelSpace& space, std::size_t n_paths,
                             std::size_t path_len, std::uint64_t seed) {
  if (n_paths == 0) throw SplitError("paths split needs at least one path");
  std::vector<std::size_t> movable;
  for (std::size_t i = 0; i < space.num_factors(); ++i)
    if (space.factor(i).cardinality >= 2) movable.push_back(i);

  Rng rng(seed);
  PathSplit out{empty_mask(space, "paths:" + std::to_string(n_paths) + "," + std::to_string(path_len), seed),
                {}, 0};
  for (std::size_t p = 0; p < n_paths; ++p) {
    FactorTuple y = space.tuple_of(rng.index(space.grid_size()));
    std::vector<CellId> walk{space.cell_of(y)};
    for (std::size_t s = 0; s < path_len && !movable.empty(); ++s) {
      const std::size_t i = movable[rng.index(movable.size())];
      const std::uint32_t card = space.factor(i).cardinality;
      const auto shift = static_cast<std::uint32_t>(1 + rng.index(card - 1));
      y[i] = (y[i] + shift) % card;
      walk.push_back(space.cell_of(y));
    }
    for (CellId c : walk) out.mask.train[c] = 1;
    out.walks.push_back(std::move(walk));
  }

  auto counts = value_counts(space, out.mask);
  while (auto missing = first_missing(counts)) {
    const auto [i, v] = *missing;
    // Uniform over all cells carrying the missing value; none of them is in
    // train yet, since the value is absent.
    const std::size_t per_value = space.grid_size() / space.factor(i).cardinality;
    std::size_t pick = rng.index(per_value);
    for (CellId c = 0; c < space.grid_size(); ++c) {
      const FactorTuple y = space.tuple_of(c);
      if (y[i] != v) continue;
      if (pick-- == 0) {
        out.mask.train[c] = 1;
        ++out.repair_cells;
        for (std::size_t f = 0; f < y.size(); ++f) ++counts[f][y[f]];
        break;
      }
    }
  }
  return out;
}

SplitMask split_paths(const ProductLabelSpace& space, std::size_t n_paths, std::size_t path_len,
                      std::uint64_t seed) {
  return split_paths_traced(space, n_paths, path_len, seed).mask;
}

namespace {

template <class T>
T parse_number(std::string_view s, const std::string& whole) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw SplitError("malformed split spec '" + whole + "'");
  return v;
}

}  // namespace

SplitSpec parse_split_spec(const std::string& text) {
  SplitSpec spec;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string_view args =
      colon == std::string::npos ? std::string_view{} : std::string_view(text).substr(colon + 1);
  if (head == "axis" && args.empty()) {
    spec.scheme = Scheme::Axis;
  } else if (head == "step") {
    spec.scheme = Scheme::Step;
    if (!args.empty()) spec.block = parse_number<std::size_t>(args, text);
  } else if (head == "rand" && !args.empty()) {
    spec.scheme = Scheme::Rand;
    spec.rho = parse_number<double>(args, text);
  } else if (head == "paths" && !args.empty()) {
    spec.scheme = Scheme::Paths;
    const auto comma = args.find(',');
    if (comma == std::string_view::npos) throw SplitError("paths spec needs '<n>,<len>'");
    spec.n_paths = parse_number<std::size_t>(args.substr(0, comma), text);
    spec.path_len = parse_number<std::size_t>(args.substr(comma + 1), text);
  } else {
    throw SplitError("unknown split spec '" + text + "'");
  }
  return spec;
}

std::string format_split_spec(const SplitSpec& spec) {
  switch (spec.scheme) {
    case Scheme::Axis: return "axis";
    case Scheme::Step: return "step:" + std::to_string(spec.block);
    case Scheme::Rand: return "rand:" + format_double(spec.rho);
    case Scheme::Paths:
      return "paths:" + std::to_string(spec.n_paths) + "," + std::to_string(spec.path_len);
  }
  return "?";
}

SplitMask make_split(const ProductLabelSpace& space, const SplitSpec& spec, std::uint64_t seed) {
  switch (spec.scheme) {
    case Scheme::Axis: return split_axis(space, spec.domain_factor, spec.label_factor, seed);
    case Scheme::Step:
      return split_step(space, spec.domain_factor, spec.label_factor, spec.block, seed);
    case Scheme::Rand: return split_rand(space, spec.rho, seed);
    case Scheme::Paths: return split_paths(space, spec.n_paths, spec.path_len, seed);
  }
  throw SplitError("unknown scheme");
}

PairSet select_pairs(const ProductLabelSpace& space, const SplitMask& mask, std::size_t i,
                     Element a) {
  const auto& f = space.factor(i);
  if (a >= f.monoid().size()) throw std::out_of_range("element not in the factor monoid");
  if (mask.train.size() != space.grid_size()) throw SplitError("mask does not match the grid");
  PairSet out{i, a, {}};
  for (CellId c = 0; c < space.grid_size(); ++c) {
    if (!mask.train[c]) continue;
    const CellId target = space.cell_of(factors::act_factor(space, i, a, space.tuple_of(c)));
    if (mask.train[target]) out.pairs.emplace_back(c, target);
  }
  return out;
}

void write_split_text(std::ostream& out, const SplitMask& mask) {
  out << "SPLIT " << mask.scheme << ' ' << mask.seed << '\n';
  for (CellId c = 0; c < mask.train.size(); ++c)
    if (mask.train[c]) out << c << '\n';
}

SplitMask read_split_text(std::istream& in, std::size_t grid_size) {
  std::string tag;
  SplitMask mask;
  if (!(in >> tag >> mask.scheme >> mask.seed) || tag != "SPLIT")
    throw SplitError("expected header 'SPLIT scheme seed'");
  mask.train.assign(grid_size, 0);
  CellId c;
  while (in >> c) {
    if (c >= grid_size) throw SplitError("split lists cell " + std::to_string(c) + " outside the grid");
    mask.train[c] = 1;
  }
  if (!in.eof()) throw SplitError("malformed split body");
  return mask;
}

}  // namespace edt::splits
