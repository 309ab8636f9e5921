#include <gtest/gtest.h>

#include <sstream>

#include "edt/algebra.hpp"

using namespace edt::algebra;

namespace {

// Independent brute-force associativity count.
std::size_t count_assoc_failures(const MonoidTable& m) {
  std::size_t bad = 0;
  for (Element a = 0; a < m.size(); ++a)
    for (Element b = 0; b < m.size(); ++b)
      for (Element c = 0; c < m.size(); ++c)
        if (m.compose(m.compose(a, b), c) != m.compose(a, m.compose(b, c))) ++bad;
  return bad;
}

}  // namespace

TEST(Monoid, CyclicAndSaturatingSatisfyLawsUpTo12) {
  for (std::size_t n = 1; n <= 12; ++n) {
    auto c = monoid_verify(monoid_cyclic(n));
    auto s = monoid_verify(monoid_saturating(n));
    EXPECT_TRUE(c.ok()) << "cyclic " << n;
    EXPECT_TRUE(s.ok()) << "saturating " << n;
    EXPECT_EQ(c.associativity.checked, n * n * n);
  }
}

TEST(Monoid, TablesMatchDefinitions) {
  auto c = monoid_cyclic(5);
  auto s = monoid_saturating(4);
  for (Element a = 0; a < 5; ++a)
    for (Element b = 0; b < 5; ++b) EXPECT_EQ(c.compose(a, b), (a + b) % 5);
  for (Element a = 0; a < 4; ++a)
    for (Element b = 0; b < 4; ++b) EXPECT_EQ(s.compose(a, b), std::min<Element>(a + b, 3));
}

TEST(Monoid, ZeroSizeRejected) {
  EXPECT_THROW(monoid_cyclic(0), std::invalid_argument);
  EXPECT_THROW(monoid_saturating(0), std::invalid_argument);
}

TEST(Monoid, PerturbedC3IsCaught) {
  auto entries = monoid_cyclic(3).entries();
  entries[1 * 3 + 1] = 0;  // 1·1 should be 2
  MonoidTable broken(3, entries, 0);
  auto v = monoid_verify(broken);
  EXPECT_FALSE(v.associativity.holds());
  EXPECT_EQ(v.associativity.violations, count_assoc_failures(broken));
  ASSERT_EQ(v.associativity.witness.size(), 3u);
  const auto& w = v.associativity.witness;
  EXPECT_NE(broken.compose(broken.compose(w[0], w[1]), w[2]),
            broken.compose(w[0], broken.compose(w[1], w[2])));
}

TEST(Monoid, BrokenIdentityIsCaught) {
  auto entries = monoid_cyclic(4).entries();
  entries[0 * 4 + 2] = 3;
  auto v = monoid_verify(MonoidTable(4, entries, 0));
  EXPECT_FALSE(v.identity.holds());
  EXPECT_EQ(v.identity.witness, std::vector<std::size_t>{2});
}

TEST(Monoid, StructuralErrors) {
  EXPECT_THROW(MonoidTable(2, {0, 1, 1}, 0), StructuralError);
  EXPECT_THROW(MonoidTable(2, {0, 1, 1, 2}, 0), StructuralError);
  EXPECT_THROW(MonoidTable(2, {0, 1, 1, 0}, 2), StructuralError);
}

TEST(Monoid, ProductsOfSmallMonoidsSatisfyLaws) {
  for (std::size_t n1 = 1; n1 <= 6; ++n1) {
    for (std::size_t n2 = 1; n2 <= 6; ++n2) {
      auto p = monoid_product(monoid_cyclic(n1), monoid_saturating(n2));
      EXPECT_TRUE(monoid_verify(p).ok());
      EXPECT_EQ(p.size(), n1 * n2);
      EXPECT_EQ(p.identity(), 0u);
      // Row-major flattening: (a1, a2) -> a1 * n2 + a2.
      for (Element a = 0; a < p.size(); ++a)
        for (Element b = 0; b < p.size(); ++b) {
          const Element c1 = (a / n2 + b / n2) % n1;
          const Element c2 = std::min<Element>(a % n2 + b % n2, n2 - 1);
          ASSERT_EQ(p.compose(a, b), c1 * n2 + c2);
        }
    }
  }
}

TEST(Monoid, InversesAndCommutativity) {
  auto c = monoid_cyclic(6);
  EXPECT_TRUE(is_group(c));
  EXPECT_EQ(inverse_of(c, 2), Element{4});
  auto s = monoid_saturating(3);
  EXPECT_FALSE(is_group(s));
  EXPECT_FALSE(inverse_of(s, 1).has_value());
  EXPECT_TRUE(is_commutative(c));
  EXPECT_TRUE(is_commutative(s));
  // A non-commutative monoid: left-zero semigroup with an adjoined identity.
  MonoidTable lz(3, {0, 1, 2, 1, 1, 1, 2, 2, 2}, 0);
  ASSERT_TRUE(monoid_verify(lz).ok());
  EXPECT_FALSE(is_commutative(lz));
}

TEST(Generators, ClosureMatchesHandComputation) {
  auto c6 = monoid_cyclic(6);
  const Element one[] = {1}, two[] = {2}, none[] = {0};
  EXPECT_EQ(closure_from_generators(c6, one).size(), 6u);
  EXPECT_EQ(closure_from_generators(c6, two), (std::vector<Element>{0, 2, 4}));
  EXPECT_EQ(closure_from_generators(c6, std::span<const Element>(none, 0)), std::vector<Element>{0});
  auto s5 = monoid_saturating(5);
  EXPECT_TRUE((GeneratorSet{&s5, {1}}.is_generating()));
  EXPECT_FALSE((GeneratorSet{&s5, {2}}.is_generating()));
  for (std::size_t n = 2; n <= 12; ++n) {
    EXPECT_EQ(closure_from_generators(monoid_cyclic(n), one).size(), n);
    EXPECT_EQ(closure_from_generators(monoid_saturating(n), one).size(), n);
  }
}

TEST(Generators, PowerRelations) {
  auto r = power_relation(monoid_cyclic(5), 1);
  EXPECT_EQ(r.index, 0u);
  EXPECT_EQ(r.period, 5u);
  r = power_relation(monoid_saturating(8), 1);
  EXPECT_EQ(r.index, 7u);
  EXPECT_EQ(r.period, 8u);
  r = power_relation(monoid_cyclic(6), 2);
  EXPECT_EQ(r.index, 0u);
  EXPECT_EQ(r.period, 3u);
  EXPECT_EQ(power(monoid_cyclic(5), 1, 7), 2u);
  EXPECT_EQ(power(monoid_saturating(3), 1, 7), 2u);
  EXPECT_EQ(power(monoid_cyclic(5), 3, 0), 0u);
}

TEST(Action, StandardActionsSatisfyLaws) {
  for (std::size_t n = 1; n <= 12; ++n) {
    EXPECT_TRUE(action_verify(rotation_action(n)).ok());
    EXPECT_TRUE(action_verify(saturating_shift_action(n, n)).ok());
    // a shift truncated to a smaller carrier is still an action; a larger one is not
    if (n >= 3) {
      EXPECT_TRUE(action_verify(saturating_shift_action(n, 3)).ok());
    }
  }
  EXPECT_FALSE(action_verify(saturating_shift_action(2, 3)).ok());
}

TEST(Action, CorruptedMapIsCaught) {
  auto good = rotation_action(4);
  auto maps = good.maps();
  maps[2 * 4 + 1] = 0;  // 2 acting on 1 should give 3
  FiniteAction bad(monoid_cyclic(4), 4, maps);
  auto v = action_verify(bad);
  EXPECT_FALSE(v.composition.holds());
  const auto& w = v.composition.witness;
  ASSERT_EQ(w.size(), 3u);
  EXPECT_NE(bad.apply(bad.monoid().compose(w[0], w[1]), w[2]), bad.apply(w[0], bad.apply(w[1], w[2])));

  auto id_maps = good.maps();
  id_maps[1] = 2;
  EXPECT_FALSE(action_verify(FiniteAction(monoid_cyclic(4), 4, id_maps)).identity.holds());
}

TEST(Action, Properties) {
  auto r = action_properties(rotation_action(5));
  EXPECT_TRUE(r.faithful);
  EXPECT_FALSE(r.trivial);
  EXPECT_EQ(r.image_size, 5u);
  // saturating(10) acting on a 3-point carrier collapses to 3 maps.
  auto s = action_properties(saturating_shift_action(10, 3));
  EXPECT_FALSE(s.faithful);
  EXPECT_EQ(s.image_size, 3u);
  auto t = action_properties(rotation_action(1));
  EXPECT_TRUE(t.trivial);
}

TEST(Action, ProductDecomposesInBothOrders) {
  for (std::size_t n1 = 1; n1 <= 12; ++n1) {
    for (std::size_t n2 : {1u, 2u, 5u, 12u}) {
      auto a1 = rotation_action(n1), a2 = saturating_shift_action(n2, n2);
      auto p = product_action(a1, a2);
      ASSERT_TRUE(action_verify(p).ok());
      auto d = check_decomposition(p, a1.monoid(), a2.monoid());
      EXPECT_TRUE(d.holds());
      EXPECT_EQ(d.checked, n1 * n2 * n1 * n2);
    }
  }
  auto p = product_action(rotation_action(5), saturating_shift_action(10, 10));
  EXPECT_EQ(action_properties(p).image_size, 50u);
}

TEST(Action, DecompositionCatchesNonProductAction) {
  // Act on (p1, p2) with the second component seeing the first element: not
  // decomposable, although the carrier and monoid shapes match.
  auto base = product_action(rotation_action(2), rotation_action(2));
  auto maps = base.maps();
  // element (1, 0) = 2 also flips the second coordinate on point (0, 0)
  maps[2 * 4 + 0] = 3;
  FiniteAction twisted(base.monoid(), 4, maps);
  EXPECT_FALSE(check_decomposition(twisted, monoid_cyclic(2), monoid_cyclic(2)).holds());
}

TEST(AlgebraText, RoundTrip) {
  auto act = saturating_shift_action(4, 4);
  std::stringstream ss;
  write_algebra_text(ss, act.monoid(), &act);
  auto t = parse_algebra_text(ss);
  EXPECT_EQ(t.monoid, act.monoid());
  ASSERT_TRUE(t.action.has_value());
  EXPECT_EQ(t.action->maps(), act.maps());

  std::stringstream bad("MONOID 2 0\n0 1\n1\n");
  EXPECT_THROW(parse_algebra_text(bad), StructuralError);
}
