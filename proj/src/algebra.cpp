#include "edt/algebra.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace edt::algebra {

MonoidTable::MonoidTable(std::size_t n, std::vector<Element> table,
                         Element identity)
    : n_(n), table_(std::move(table)), identity_(identity) {
  if (n_ == 0) throw StructuralError("monoid table must have at least one element");
  if (table_.size() != n_ * n_) {
    throw StructuralError("monoid table has " + std::to_string(table_.size()) +
                          " entries, expected " + std::to_string(n_ * n_));
  }
  if (identity_ >= n_) throw StructuralError("identity id out of range");
  for (std::size_t k = 0; k < table_.size(); ++k) {
    if (table_[k] >= n_) {
      throw StructuralError("table entry [" + std::to_string(k / n_) + "][" +
                            std::to_string(k % n_) + "] = " +
                            std::to_string(table_[k]) + " out of range");
    }
  }
}

MonoidVerification monoid_verify(const MonoidTable& m) {
  const std::size_t n = m.size();
  MonoidVerification out;
  out.associativity.law = "associativity";
  out.identity.law = "identity";

  for (Element a = 0; a < n; ++a) {
    for (Element b = 0; b < n; ++b) {
      const Element ab = m.compose(a, b);
      for (Element c = 0; c < n; ++c) {
        ++out.associativity.checked;
        if (m.compose(ab, c) != m.compose(a, m.compose(b, c))) {
          if (out.associativity.violations++ == 0) out.associativity.witness = {a, b, c};
        }
      }
    }
  }

  const Element e = m.identity();
  for (Element a = 0; a < n; ++a) {
    ++out.identity.checked;
    if (m.compose(e, a) != a || m.compose(a, e) != a) {
      if (out.identity.violations++ == 0) out.identity.witness = {a};
    }
  }
  return out;
}

MonoidTable monoid_cyclic(std::size_t n) {
  if (n == 0) throw std::invalid_argument("cyclic monoid needs n >= 1");
  std::vector<Element> t(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) t[a * n + b] = static_cast<Element>((a + b) % n);
  return MonoidTable(n, std::move(t), 0);
}

MonoidTable monoid_saturating(std::size_t n) {
  if (n == 0) throw std::invalid_argument("saturating monoid needs n >= 1");
  std::vector<Element> t(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      t[a * n + b] = static_cast<Element>(std::min(a + b, n - 1));
  return MonoidTable(n, std::move(t), 0);
}

MonoidTable monoid_product(const MonoidTable& m1, const MonoidTable& m2) {
  const std::size_t n1 = m1.size(), n2 = m2.size(), n = n1 * n2;
  std::vector<Element> t(n * n);
  for (std::size_t x = 0; x < n; ++x) {
    const auto x1 = static_cast<Element>(x / n2), x2 = static_cast<Element>(x % n2);
    for (std::size_t y = 0; y < n; ++y) {
      const auto y1 = static_cast<Element>(y / n2), y2 = static_cast<Element>(y % n2);
      t[x * n + y] = static_cast<Element>(m1.compose(x1, y1) * n2 + m2.compose(x2, y2));
    }
  }
  const auto e = static_cast<Element>(m1.identity() * n2 + m2.identity());
  return MonoidTable(n, std::move(t), e);
}

std::optional<Element> inverse_of(const MonoidTable& m, Element a) {
  for (Element b = 0; b < m.size(); ++b) {
    if (m.compose(a, b) == m.identity() && m.compose(b, a) == m.identity()) return b;
  }
  return std::nullopt;
}

bool is_group(const MonoidTable& m) {
  for (Element a = 0; a < m.size(); ++a)
    if (!inverse_of(m, a)) return false;
  return true;
}

bool is_commutative(const MonoidTable& m) {
  for (Element a = 0; a < m.size(); ++a)
    for (Element b = a + 1; b < m.size(); ++b)
      if (m.compose(a, b) != m.compose(b, a)) return false;
  return true;
}

std::vector<Element> closure_from_generators(const MonoidTable& m,
                                             std::span<const Element> gens) {
  std::vector<bool> seen(m.size(), false);
  std::vector<Element> frontier{m.identity()};
  seen[m.identity()] = true;
  for (Element g : gens) {
    if (g >= m.size()) throw StructuralError("generator id out of range");
  }
  // Every element of the closure is a word in gens, so extending words on
  // the right by one generator at a time reaches all of it.
  while (!frontier.empty()) {
    std::vector<Element> next;
    for (Element x : frontier) {
      for (Element g : gens) {
        const Element y = m.compose(x, g);
        if (!seen[y]) {
          seen[y] = true;
          next.push_back(y);
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<Element> out;
  for (Element a = 0; a < m.size(); ++a)
    if (seen[a]) out.push_back(a);
  return out;
}

std::vector<Element> closure_from_generators(const GeneratorSet& g) {
  if (g.monoid == nullptr) throw std::invalid_argument("generator set without monoid");
  return closure_from_generators(*g.monoid, g.gens);
}

bool GeneratorSet::is_generating() const {
  return closure_from_generators(*this).size() == monoid->size();
}

Element power(const MonoidTable& m, Element g, std::size_t k) {
  Element acc = m.identity();
  for (std::size_t i = 0; i < k; ++i) acc = m.compose(acc, g);
  return acc;
}

PowerRelation power_relation(const MonoidTable& m, Element g) {
  std::vector<std::size_t> first_seen(m.size(), m.size() + 1);
  Element acc = m.identity();
  for (std::size_t k = 0;; ++k) {
    if (first_seen[acc] <= m.size()) return {first_seen[acc], k};
    first_seen[acc] = k;
    acc = m.compose(acc, g);
  }
}

FiniteAction::FiniteAction(MonoidTable monoid, std::size_t carrier_size,
                           std::vector<std::uint32_t> maps)
    : monoid_(std::move(monoid)), m_(carrier_size), maps_(std::move(maps)) {
  if (maps_.size() != monoid_.size() * m_) {
    throw StructuralError("action has " + std::to_string(maps_.size()) +
                          " map entries, expected " +
                          std::to_string(monoid_.size() * m_));
  }
  for (std::size_t k = 0; k < maps_.size(); ++k) {
    if (maps_[k] >= m_) {
      throw StructuralError("action map of element " + std::to_string(k / m_) +
                            " sends " + std::to_string(k % m_) + " to " +
                            std::to_string(maps_[k]) + ", outside the carrier");
    }
  }
}

ActionVerification action_verify(const FiniteAction& act) {
  const MonoidTable& mon = act.monoid();
  const std::size_t n = mon.size(), m = act.carrier_size();
  ActionVerification out;
  out.composition.law = "composition";
  out.identity.law = "identity-map";

  for (Element a = 0; a < n; ++a) {
    for (Element b = 0; b < n; ++b) {
      const Element ab = mon.compose(a, b);
      for (std::uint32_t p = 0; p < m; ++p) {
        ++out.composition.checked;
        if (act.apply(ab, p) != act.apply(a, act.apply(b, p))) {
          if (out.composition.violations++ == 0) out.composition.witness = {a, b, p};
        }
      }
    }
  }
  for (std::uint32_t p = 0; p < m; ++p) {
    ++out.identity.checked;
    if (act.apply(mon.identity(), p) != p) {
      if (out.identity.violations++ == 0) out.identity.witness = {p};
    }
  }
  return out;
}

ActionProperties action_properties(const FiniteAction& act) {
  const std::size_t n = act.monoid().size();
  std::set<std::vector<std::uint32_t>> distinct;
  bool trivial = true;
  for (Element a = 0; a < n; ++a) {
    auto map = act.map(a);
    distinct.emplace(map.begin(), map.end());
    for (std::uint32_t p = 0; p < map.size(); ++p)
      if (map[p] != p) trivial = false;
  }
  return {distinct.size() == n, trivial, distinct.size()};
}

FiniteAction rotation_action(std::size_t n) {
  std::vector<std::uint32_t> maps(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t p = 0; p < n; ++p) maps[a * n + p] = static_cast<std::uint32_t>((p + a) % n);
  return FiniteAction(monoid_cyclic(n), n, std::move(maps));
}

FiniteAction saturating_shift_action(std::size_t n, std::size_t m) {
  if (m == 0) throw std::invalid_argument("empty carrier");
  std::vector<std::uint32_t> maps(n * m);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t p = 0; p < m; ++p)
      maps[a * m + p] = static_cast<std::uint32_t>(std::min(p + a, m - 1));
  return FiniteAction(monoid_saturating(n), m, std::move(maps));
}

FiniteAction product_action(const FiniteAction& a1, const FiniteAction& a2) {
  const std::size_t n1 = a1.monoid().size(), n2 = a2.monoid().size();
  const std::size_t m1 = a1.carrier_size(), m2 = a2.carrier_size();
  const std::size_t n = n1 * n2, m = m1 * m2;
  std::vector<std::uint32_t> maps(n * m);
  for (std::size_t x = 0; x < n; ++x) {
    const auto x1 = static_cast<Element>(x / n2), x2 = static_cast<Element>(x % n2);
    for (std::size_t p = 0; p < m; ++p) {
      const auto p1 = static_cast<std::uint32_t>(p / m2), p2 = static_cast<std::uint32_t>(p % m2);
      maps[x * m + p] = static_cast<std::uint32_t>(a1.apply(x1, p1) * m2 + a2.apply(x2, p2));
    }
  }
  return FiniteAction(monoid_product(a1.monoid(), a2.monoid()), m, std::move(maps));
}

LawReport check_decomposition(const FiniteAction& product, const MonoidTable& m1,
                              const MonoidTable& m2) {
  const std::size_t n1 = m1.size(), n2 = m2.size();
  if (product.monoid().size() != n1 * n2) {
    throw StructuralError("product action does not act through m1 x m2");
  }
  LawReport r;
  r.law = "decomposition";
  const std::size_t m = product.carrier_size();
  for (Element a1 = 0; a1 < n1; ++a1) {
    for (Element a2 = 0; a2 < n2; ++a2) {
      const auto full = static_cast<Element>(a1 * n2 + a2);
      const auto left = static_cast<Element>(a1 * n2 + m2.identity());
      const auto right = static_cast<Element>(m1.identity() * n2 + a2);
      for (std::uint32_t p = 0; p < m; ++p) {
        ++r.checked;
        const auto target = product.apply(full, p);
        if (product.apply(left, product.apply(right, p)) != target ||
            product.apply(right, product.apply(left, p)) != target) {
          if (r.violations++ == 0) r.witness = {a1, a2, p};
        }
      }
    }
  }
  return r;
}

namespace {

std::vector<std::uint32_t> read_ids(std::istream& in, std::size_t count,
                                    const char* what) {
  std::vector<std::uint32_t> ids(count);
  for (auto& id : ids) {
    long long v;
    if (!(in >> v)) throw StructuralError(std::string("truncated ") + what);
    if (v < 0 || v > 0xffffffffLL) throw StructuralError(std::string("negative id in ") + what);
    id = static_cast<std::uint32_t>(v);
  }
  return ids;
}

}  // namespace

AlgebraText parse_algebra_text(std::istream& in) {
  std::string tag;
  std::size_t n;
  long long e;
  if (!(in >> tag >> n >> e) || tag != "MONOID") {
    throw StructuralError("expected header 'MONOID n identity'");
  }
  if (e < 0) throw StructuralError("negative identity id");
  MonoidTable m(n, read_ids(in, n * n, "monoid table"), static_cast<Element>(e));
  if (!(in >> tag)) return {std::move(m), std::nullopt};
  std::size_t carrier;
  if (tag != "ACTION" || !(in >> carrier)) throw StructuralError("expected 'ACTION m'");
  auto maps = read_ids(in, n * carrier, "action maps");
  FiniteAction act(m, carrier, std::move(maps));
  return {std::move(m), std::move(act)};
}

void write_algebra_text(std::ostream& out, const MonoidTable& m,
                        const FiniteAction* action) {
  out << "MONOID " << m.size() << ' ' << m.identity() << '\n';
  for (Element a = 0; a < m.size(); ++a) {
    auto row = m.row(a);
    for (std::size_t b = 0; b < row.size(); ++b) out << (b ? " " : "") << row[b];
    out << '\n';
  }
  if (action == nullptr) return;
  out << "ACTION " << action->carrier_size() << '\n';
  for (Element a = 0; a < m.size(); ++a) {
    auto map = action->map(a);
    for (std::size_t p = 0; p < map.size(); ++p) out << (p ? " " : "") << map[p];
    out << '\n';
  }
}

}  // namespace edt::algebra
