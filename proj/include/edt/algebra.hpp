#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edt::algebra {

using Element = std::uint32_t;

/// Raised when a table or action is malformed (wrong shape, ids out of range).
/// Distinct from a law violation, which is reported through LawReport.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite monoid given by its Cayley table: compose(a, b) = table[a][b].
///
/// Construction validates shape and id ranges only; the monoid laws are
/// checked separately by monoid_verify so that broken tables can still be
/// inspected.
class MonoidTable {
 public:
  MonoidTable(std::size_t n, std::vector<Element> table, Element identity);

  std::size_t size() const { return n_; }
  Element identity() const { return identity_; }
  Element compose(Element a, Element b) const { return table_[a * n_ + b]; }
  std::span<const Element> row(Element a) const {
    return {table_.data() + a * n_, n_};
  }
  const std::vector<Element>& entries() const { return table_; }

  bool operator==(const MonoidTable&) const = default;

 private:
  std::size_t n_;
  std::vector<Element> table_;
  Element identity_;
};

/// Outcome of one exhaustive law check.
struct LawReport {
  std::string law;
  std::size_t checked = 0;
  std::size_t violations = 0;
  // First violating tuple in enumeration order (element / carrier ids).
  std::vector<std::size_t> witness;
  // Always 0 for the integer checks here; image-level checks store the
  // largest absolute pixel difference.
  double max_residual = 0.0;

  bool holds() const { return violations == 0; }
};

struct MonoidVerification {
  LawReport associativity;
  LawReport identity;
  bool ok() const { return associativity.holds() && identity.holds(); }
};

MonoidVerification monoid_verify(const MonoidTable& m);

MonoidTable monoid_cyclic(std::size_t n);
/// {0..n-1} under a·b = min(a+b, n-1): truncated natural-number addition.
MonoidTable monoid_saturating(std::size_t n);
/// Componentwise product; pair (a1, a2) is flattened to a1 * |m2| + a2.
MonoidTable monoid_product(const MonoidTable& m1, const MonoidTable& m2);

std::optional<Element> inverse_of(const MonoidTable& m, Element a);
bool is_group(const MonoidTable& m);
bool is_commutative(const MonoidTable& m);

struct GeneratorSet {
  const MonoidTable* monoid = nullptr;
  std::vector<Element> gens;

  bool is_generating() const;
};

/// Least subset containing the identity and `gens` that is closed under
/// composition. Returned sorted.
std::vector<Element> closure_from_generators(const MonoidTable& m,
                                             std::span<const Element> gens);
std::vector<Element> closure_from_generators(const GeneratorSet& g);

/// Smallest p < q with g^q = g^p (powers taken from the identity, g^0 = e).
struct PowerRelation {
  std::size_t index;   // p
  std::size_t period;  // q
};
PowerRelation power_relation(const MonoidTable& m, Element g);
Element power(const MonoidTable& m, Element g, std::size_t k);

/// Monoid action on the finite carrier {0..m-1}, stored curried: one map per
/// element, map(a)[p] = act(a, p).
class FiniteAction {
 public:
  FiniteAction(MonoidTable monoid, std::size_t carrier_size,
               std::vector<std::uint32_t> maps);

  const MonoidTable& monoid() const { return monoid_; }
  std::size_t carrier_size() const { return m_; }
  std::uint32_t apply(Element a, std::uint32_t p) const {
    return maps_[a * m_ + p];
  }
  std::span<const std::uint32_t> map(Element a) const {
    return {maps_.data() + a * m_, m_};
  }
  const std::vector<std::uint32_t>& maps() const { return maps_; }

 private:
  MonoidTable monoid_;
  std::size_t m_;
  std::vector<std::uint32_t> maps_;
};

struct ActionVerification {
  LawReport composition;  // map(a·b) = map(a) ∘ map(b)
  LawReport identity;     // map(e) = id
  bool ok() const { return composition.holds() && identity.holds(); }
};

ActionVerification action_verify(const FiniteAction& act);

struct ActionProperties {
  bool faithful = false;
  bool trivial = false;
  std::size_t image_size = 0;  // number of distinct endofunctions
};

ActionProperties action_properties(const FiniteAction& act);

/// Rotation p -> (p + a) mod n of cyclic(n) on {0..n-1}.
FiniteAction rotation_action(std::size_t n);
/// Saturating shift p -> min(p + a, m - 1) of saturating(n) on {0..m-1}.
FiniteAction saturating_shift_action(std::size_t n, std::size_t m);

/// Componentwise action of the product monoid on the product carrier
/// (p1, p2) -> p1 * m2 + p2.
FiniteAction product_action(const FiniteAction& a1, const FiniteAction& a2);

/// Checks both decomposition orders
///   act(a1, a2) = act(a1, e2) ∘ act(e1, a2) = act(e1, a2) ∘ act(a1, e2)
/// pointwise, where `product` acts through monoid_product(m1, m2).
LawReport check_decomposition(const FiniteAction& product,
                              const MonoidTable& m1, const MonoidTable& m2);

// Text format:
//   MONOID n identity
//   n lines of n ids
//   [ACTION m
//    n lines of m ids]
struct AlgebraText {
  MonoidTable monoid;
  std::optional<FiniteAction> action;
};

AlgebraText parse_algebra_text(std::istream& in);
void write_algebra_text(std::ostream& out, const MonoidTable& m,
                        const FiniteAction* action = nullptr);

}  // namespace edt::algebra
