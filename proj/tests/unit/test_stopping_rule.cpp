#include "drbsde/stopping_rule.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"

namespace drbsde {
namespace {

using testing::random_rule;

TEST(StoppingRule, TerminalNodesAlwaysStop) {
  const Lattice lat = Lattice::build(1.0, 3, LatticeMode::full_tree);
  StoppingRule r(lat);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_TRUE(r.stops(3, i));
  r.set(3, 2, false);
  EXPECT_TRUE(r.stops(3, 2));
  EXPECT_FALSE(r.stops(0, 0));
}

TEST(StoppingRule, StoppingStepAlongPaths) {
  const Lattice lat = Lattice::build(1.0, 3, LatticeMode::full_tree);
  // Stop the first time the walk is above zero.
  const auto r = StoppingRule::from_predicate(lat, [](const Node& n) { return n.state > 0.0; });
  EXPECT_EQ(r.stopping_step(0b100), 1);
  EXPECT_EQ(r.stopping_step(0b011), 3);
  EXPECT_EQ(r.stopping_step(0b010), 3);
  EXPECT_EQ(r.stopping_step(0b000), 3);
  EXPECT_EQ(StoppingRule::at_step(lat, 2).stopping_step(0b101), 2);
}

TEST(StoppingRule, CountsFollowTheRecursion) {
  EXPECT_EQ(count_stopping_rules(0), 1u);
  EXPECT_EQ(count_stopping_rules(1), 2u);
  EXPECT_EQ(count_stopping_rules(2), 5u);
  EXPECT_EQ(count_stopping_rules(3), 26u);
  EXPECT_EQ(count_stopping_rules(4), 677u);
  EXPECT_EQ(count_stopping_rules(5), 458330u);
}

TEST(StoppingRule, EnumerationIsCompleteAndCanonical) {
  for (int n = 1; n <= kMaxEnumerationSteps; ++n) {
    const Lattice lat = Lattice::build(1.0, n, LatticeMode::full_tree);
    const auto rules = enumerate_stopping_rules(lat);
    EXPECT_EQ(rules.size(), count_stopping_rules(n));
    std::set<std::vector<std::uint8_t>> distinct;
    for (const auto& r : rules) {
      EXPECT_TRUE(r.is_canonical());
      distinct.emplace(r.flags().begin(), r.flags().end());
    }
    EXPECT_EQ(distinct.size(), rules.size());
    // Stop-at-root comes first.
    EXPECT_TRUE(rules.front().stops(0, 0));
  }
  // Every random rule's canonical form appears in the enumeration.
  const Lattice lat = Lattice::build(1.0, 3, LatticeMode::full_tree);
  const auto rules = enumerate_stopping_rules(lat);
  std::mt19937_64 rng(5);
  for (int s = 0; s < 50; ++s) {
    const auto c = random_rule(lat, rng, 0.4).canonical();
    EXPECT_NE(std::find(rules.begin(), rules.end(), c), rules.end());
  }
}

TEST(StoppingRule, EnumerationGuards) {
  EXPECT_THROW(enumerate_stopping_rules(Lattice::build(1.0, 5, LatticeMode::full_tree)),
               std::length_error);
  EXPECT_THROW(enumerate_stopping_rules(Lattice::build(1.0, 3, LatticeMode::recombining)),
               std::invalid_argument);
}

TEST(StoppingRule, CanonicalIsIdempotentAndPreservesStoppingSteps) {
  const Lattice lat = Lattice::build(1.0, 6, LatticeMode::full_tree);
  std::mt19937_64 rng(17);
  for (int s = 0; s < 100; ++s) {
    const auto r = random_rule(lat, rng, 0.3);
    const auto c = r.canonical();
    EXPECT_EQ(c.canonical(), c);
    EXPECT_EQ(c.hash(), c.canonical().hash());
    for (std::uint64_t p = 0; p < 64; ++p) EXPECT_EQ(r.stopping_step(p), c.stopping_step(p));
  }
}

TEST(StoppingRule, EarliestAndPrecedes) {
  const Lattice lat = Lattice::build(1.0, 5, LatticeMode::full_tree);
  std::mt19937_64 rng(3);
  for (int s = 0; s < 50; ++s) {
    const auto a = random_rule(lat, rng, 0.25);
    const auto b = random_rule(lat, rng, 0.25);
    const auto m = earliest(a, b);
    EXPECT_TRUE(precedes(m, a));
    EXPECT_TRUE(precedes(m, b));
    for (std::uint64_t p = 0; p < 32; ++p) {
      EXPECT_EQ(m.stopping_step(p), std::min(a.stopping_step(p), b.stopping_step(p)));
    }
    bool pathwise = true;
    for (std::uint64_t p = 0; p < 32; ++p) pathwise &= a.stopping_step(p) <= b.stopping_step(p);
    EXPECT_EQ(precedes(a, b), pathwise);
  }
  EXPECT_TRUE(precedes(StoppingRule::at_step(lat, 1), StoppingRule::at_step(lat, 2)));
  EXPECT_FALSE(precedes(StoppingRule::at_step(lat, 2), StoppingRule::at_step(lat, 1)));
}

TEST(StoppingRule, PhaseAndAncestor) {
  const Lattice tree = Lattice::build(1.0, 2, LatticeMode::full_tree);
  auto r = StoppingRule(tree);
  r.set(1, 1, true);
  const auto phase = stop_phase(r);
  EXPECT_EQ(phase[0], StopPhase::before);
  EXPECT_EQ(phase[tree.offset(1) + 1], StopPhase::at_or_after);
  EXPECT_EQ(phase[tree.offset(2) + 3], StopPhase::at_or_after);
  EXPECT_EQ(phase[tree.offset(2) + 0], StopPhase::at_or_after);
  const auto anc = stopping_ancestor(r);
  EXPECT_EQ(anc[tree.offset(2) + 2], tree.offset(1) + 1);
  EXPECT_EQ(anc[0], SIZE_MAX);

  // On a recombining lattice the middle node is reached both stopped and not.
  const Lattice rec = Lattice::build(1.0, 3, LatticeMode::recombining);
  auto q = StoppingRule(rec);
  q.set(1, 1, true);
  EXPECT_EQ(stop_phase(q)[rec.offset(2) + 1], StopPhase::mixed);
}

TEST(StoppingRule, NodeOnPath) {
  const Lattice tree = Lattice::build(1.0, 3, LatticeMode::full_tree);
  EXPECT_EQ(node_on_path(tree, 0b110, 2), 0b11u);
  const Lattice rec = Lattice::build(1.0, 3, LatticeMode::recombining);
  EXPECT_EQ(node_on_path(rec, 0b110, 2), 2u);
}

}  // namespace
}  // namespace drbsde
