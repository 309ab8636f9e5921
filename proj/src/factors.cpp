#include "edt/factors.hpp"

#include <set>
#include <stdexcept>

namespace edt::factors {

std::string_view to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::Categorical: return "categorical";
    case FactorKind::Cyclic: return "cyclic";
    case FactorKind::Ordinal: return "ordinal";
  }
  return "?";
}

FactorKind parse_factor_kind(std::string_view text) {
  if (text == "categorical") return FactorKind::Categorical;
  if (text == "cyclic") return FactorKind::Cyclic;
  if (text == "ordinal") return FactorKind::Ordinal;
  throw std::invalid_argument("unknown factor kind '" + std::string(text) + "'");
}

FactorSpec make_factor(std::string name, FactorKind kind, std::uint32_t cardinality) {
  if (cardinality == 0) throw std::invalid_argument("factor '" + name + "' has cardinality 0");
  auto action = kind == FactorKind::Ordinal
                    ? algebra::saturating_shift_action(cardinality, cardinality)
                    : algebra::rotation_action(cardinality);
  return FactorSpec{std::move(name), kind, cardinality, std::move(action)};
}

std::string to_string(const FactorTuple& y) {
  std::string s = "[";
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(y[i]);
  }
  return s + "]";
}

ProductLabelSpace::ProductLabelSpace(std::vector<FactorSpec> factors)
    : factors_(std::move(factors)) {
  if (factors_.empty()) throw std::invalid_argument("label space needs at least one factor");
  std::set<std::string> names;
  for (const auto& f : factors_) {
    if (!names.insert(f.name).second) {
      throw std::invalid_argument("duplicate factor name '" + f.name + "'");
    }
  }
  strides_.assign(factors_.size(), 1);
  for (std::size_t i = factors_.size(); i-- > 0;) {
    strides_[i] = grid_size_;
    grid_size_ *= factors_[i].cardinality;
  }
}

const FactorSpec& ProductLabelSpace::factor(std::size_t i) const {
  if (i >= factors_.size()) throw std::out_of_range("factor index " + std::to_string(i));
  return factors_[i];
}

std::size_t ProductLabelSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].name == name) return i;
  return factors_.size();
}

bool ProductLabelSpace::valid(const FactorTuple& y) const {
  if (y.size() != factors_.size()) return false;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] >= factors_[i].cardinality) return false;
  return true;
}

CellId ProductLabelSpace::cell_of(const FactorTuple& y) const {
  if (!valid(y)) throw std::out_of_range("tuple " + to_string(y) + " is not in the label space");
  CellId id = 0;
  for (std::size_t i = 0; i < y.size(); ++i) id += y[i] * strides_[i];
  return id;
}

FactorTuple ProductLabelSpace::tuple_of(CellId id) const {
  if (id >= grid_size_) throw std::out_of_range("cell id " + std::to_string(id));
  FactorTuple y{std::vector<std::uint32_t>(factors_.size())};
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    y[i] = static_cast<std::uint32_t>(id / strides_[i]);
    id %= strides_[i];
  }
  return y;
}

std::vector<Element> ProductLabelSpace::generators(std::size_t i) const {
  const auto& m = factor(i).monoid();
  if (m.size() < 2) return {};
  std::vector<Element> g{1};
  // Both constructions are generated by 1; kept as a checked claim.
  if (algebra::closure_from_generators(m, g).size() != m.size()) {
    throw std::logic_error("factor '" + factor(i).name + "' is not generated by {1}");
  }
  return g;
}

ProductLabelSpace default_minisprites_space() {
  return ProductLabelSpace({
      make_factor("color", FactorKind::Cyclic, 5),
      make_factor("shape", FactorKind::Categorical, 3),
      make_factor("scale", FactorKind::Ordinal, 3),
      make_factor("pos_x", FactorKind::Ordinal, 8),
      make_factor("pos_y", FactorKind::Ordinal, 8),
  });
}

FactorTuple act_factor(const ProductLabelSpace& space, std::size_t i, Element a,
                       const FactorTuple& y) {
  const auto& f = space.factor(i);
  if (a >= f.monoid().size()) {
    throw std::out_of_range("element " + std::to_string(a) + " not in monoid of '" + f.name + "'");
  }
  if (!space.valid(y)) throw std::out_of_range("tuple " + to_string(y) + " is not in the label space");
  FactorTuple out = y;
  out[i] = f.action.apply(a, y[i]);
  return out;
}

FactorTuple act_tuple(const ProductLabelSpace& space, std::span<const Element> elems,
                      const FactorTuple& y) {
  if (elems.size() != space.num_factors()) {
    throw std::invalid_argument("act_tuple: got " + std::to_string(elems.size()) +
                                " elements for " + std::to_string(space.num_factors()) +
                                " factors");
  }
  FactorTuple out = y;
  for (std::size_t i = 0; i < elems.size(); ++i) out = act_factor(space, i, elems[i], out);
  return out;
}

std::uint32_t project(const ProductLabelSpace& space, std::size_t i, const FactorTuple& y) {
  if (i >= space.num_factors()) throw std::out_of_range("factor index " + std::to_string(i));
  return y[i];
}

}  // namespace edt::factors
