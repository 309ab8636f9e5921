#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edt/algebra.hpp"

namespace edt::factors {

using algebra::Element;

enum class FactorKind : std::uint8_t { Categorical = 0, Cyclic = 1, Ordinal = 2 };

std::string_view to_string(FactorKind kind);
FactorKind parse_factor_kind(std::string_view text);

/// One label component together with its monoid and its ground-truth action.
struct FactorSpec {
  std::string name;
  FactorKind kind;
  std::uint32_t cardinality;
  algebra::FiniteAction action;

  const algebra::MonoidTable& monoid() const { return action.monoid(); }
  /// Predicted as a class distribution (as opposed to a scaled scalar).
  bool is_classified() const { return kind != FactorKind::Ordinal; }
};

/// Cyclic and Categorical factors get rotation by cyclic(n); Ordinal factors
/// get the saturating shift of saturating(n).
FactorSpec make_factor(std::string name, FactorKind kind, std::uint32_t cardinality);

struct FactorTuple {
  std::vector<std::uint32_t> values;

  std::size_t size() const { return values.size(); }
  std::uint32_t operator[](std::size_t i) const { return values[i]; }
  std::uint32_t& operator[](std::size_t i) { return values[i]; }
  auto operator<=>(const FactorTuple&) const = default;
};

std::string to_string(const FactorTuple& y);

/// Index of a cell of the combination grid: row-major over factors, first
/// factor most significant.
using CellId = std::size_t;

class ProductLabelSpace {
 public:
  explicit ProductLabelSpace(std::vector<FactorSpec> factors);

  std::size_t num_factors() const { return factors_.size(); }
  const FactorSpec& factor(std::size_t i) const;
  const std::vector<FactorSpec>& factors() const { return factors_; }
  /// Index of the factor with the given name, or num_factors() if absent.
  std::size_t find(std::string_view name) const;

  std::size_t grid_size() const { return grid_size_; }
  CellId cell_of(const FactorTuple& y) const;
  FactorTuple tuple_of(CellId id) const;
  bool valid(const FactorTuple& y) const;

  /// Minimal generating set of factor i's monoid ({1} for n >= 2, {} otherwise).
  std::vector<Element> generators(std::size_t i) const;

 private:
  std::vector<FactorSpec> factors_;
  std::vector<std::size_t> strides_;
  std::size_t grid_size_ = 1;
};

/// color Cyclic(5), shape Categorical(3), scale Ordinal(3), pos_x Ordinal(8),
/// pos_y Ordinal(8): 2880 combinations.
ProductLabelSpace default_minisprites_space();

/// Replaces component i by action_i(a, y[i]); every other component is untouched.
FactorTuple act_factor(const ProductLabelSpace& space, std::size_t i, Element a,
                       const FactorTuple& y);
/// Componentwise action; elems holds one element id per factor.
FactorTuple act_tuple(const ProductLabelSpace& space, std::span<const Element> elems,
                      const FactorTuple& y);
std::uint32_t project(const ProductLabelSpace& space, std::size_t i, const FactorTuple& y);

}  // namespace edt::factors
