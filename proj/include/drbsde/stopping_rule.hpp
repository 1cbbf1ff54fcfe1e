#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "drbsde/lattice.hpp"

namespace drbsde {

/// Adapted stop/continue decision: one flag per lattice node. A path stops at
/// its first flagged node; every terminal node is flagged.
///
/// On a full tree every stopping time is representable. On a recombining
/// lattice only node-based (Markov) rules are, and some path-dependent
/// queries are rejected when two paths reaching the same node disagree.
class StoppingRule {
 public:
  /// tau = T: only the terminal nodes are flagged.
  explicit StoppingRule(const Lattice& lattice);

  /// tau = k on every path.
  static StoppingRule at_step(const Lattice& lattice, int k);
  static StoppingRule from_predicate(const Lattice& lattice,
                                     const std::function<bool(const Node&)>& stop);

  const Lattice& lattice() const { return lattice_; }

  bool stops(int k, std::size_t i) const { return flags_[lattice_.offset(k) + i] != 0; }
  bool stops(const Node& n) const { return stops(n.step, n.index); }
  /// Terminal flags cannot be cleared.
  void set(int k, std::size_t i, bool stop);

  std::span<const std::uint8_t> flags() const { return flags_; }

  /// Clears flags no path can reach before stopping. Idempotent.
  StoppingRule canonical() const;
  bool is_canonical() const;

  /// Per node: some path reaches it without having stopped at an earlier node.
  std::vector<std::uint8_t> reachable_unstopped() const;

  /// Stopping step along a path given as N bits, first move most significant,
  /// 1 = up.
  int stopping_step(std::uint64_t path) const;

  std::uint64_t hash() const;

  bool operator==(const StoppingRule& other) const = default;

 private:
  Lattice lattice_;
  std::vector<std::uint8_t> flags_;
};

/// Node index at step k on the given path.
std::size_t node_on_path(const Lattice& lattice, std::uint64_t path, int k);

/// min(a, b): stop at the first node flagged by either rule.
StoppingRule earliest(const StoppingRule& a, const StoppingRule& b);

/// True when nu <= tau on every path.
bool precedes(const StoppingRule& nu, const StoppingRule& tau);

enum class StopPhase : std::int8_t { before = 0, at_or_after = 1, mixed = -1 };

/// Per node: whether the rule has already stopped (at this node or earlier)
/// on the paths reaching it. `mixed` only occurs on recombining lattices.
std::vector<StopPhase> stop_phase(const StoppingRule& rule);

/// For each node, the flat id of the ancestor (or the node itself) where
/// `rule` stops; SIZE_MAX where the rule has not stopped yet. Full tree only.
std::vector<std::size_t> stopping_ancestor(const StoppingRule& rule);

/// Exhaustive enumeration is limited to trees of this depth: the rule count
/// obeys S(0) = 1, S(d) = 1 + S(d-1)^2, so S(5) is already 458330.
inline constexpr int kMaxEnumerationSteps = 4;

/// S(depth): number of canonical stopping rules on a full tree of that depth.
std::uint64_t count_stopping_rules(int depth);

/// Every canonical stopping rule of a full tree exactly once, in a fixed
/// order: at each node "stop here" comes first, then the continuation
/// choices with the down subtree varying slowest.
std::vector<StoppingRule> enumerate_stopping_rules(const Lattice& lattice);

}  // namespace drbsde
