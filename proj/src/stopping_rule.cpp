#include "drbsde/stopping_rule.hpp"

#include <bit>
#include <limits>
#include <stdexcept>
#include <string>

#include "drbsde/io.hpp"

namespace drbsde {

StoppingRule::StoppingRule(const Lattice& lattice)
    : lattice_(lattice), flags_(lattice.node_count(), 0) {
  const int n = lattice.steps();
  for (std::size_t i = 0; i < lattice.nodes_at(n); ++i) flags_[lattice.offset(n) + i] = 1;
}

StoppingRule StoppingRule::at_step(const Lattice& lattice, int k) {
  if (k < 0 || k > lattice.steps()) {
    throw std::out_of_range("stopping step " + std::to_string(k) + " outside the lattice");
  }
  StoppingRule r(lattice);
  for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) r.set(k, i, true);
  return r;
}

StoppingRule StoppingRule::from_predicate(const Lattice& lattice,
                                          const std::function<bool(const Node&)>& stop) {
  StoppingRule r(lattice);
  for (int k = 0; k < lattice.steps(); ++k) {
    for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) r.set(k, i, stop(lattice.node(k, i)));
  }
  return r;
}

void StoppingRule::set(int k, std::size_t i, bool stop) {
  if (k == lattice_.steps()) return;
  flags_[lattice_.offset(k) + i] = stop ? 1 : 0;
}

std::vector<std::uint8_t> StoppingRule::reachable_unstopped() const {
  std::vector<std::uint8_t> live(flags_.size(), 0);
  live[0] = 1;
  for (int k = 0; k < lattice_.steps(); ++k) {
    for (std::size_t i = 0; i < lattice_.nodes_at(k); ++i) {
      const std::size_t id = lattice_.offset(k) + i;
      if (!live[id] || flags_[id]) continue;
      live[lattice_.offset(k + 1) + lattice_.down_child(k, i)] = 1;
      live[lattice_.offset(k + 1) + lattice_.up_child(k, i)] = 1;
    }
  }
  return live;
}

StoppingRule StoppingRule::canonical() const {
  StoppingRule out = *this;
  const auto live = reachable_unstopped();
  const std::size_t interior = lattice_.offset(lattice_.steps());
  for (std::size_t id = 0; id < interior; ++id) {
    if (!live[id]) out.flags_[id] = 0;
  }
  return out;
}

bool StoppingRule::is_canonical() const { return canonical() == *this; }

std::size_t node_on_path(const Lattice& lattice, std::uint64_t path, int k) {
  const std::uint64_t prefix = k == 0 ? 0 : path >> (lattice.steps() - k);
  if (lattice.is_full_tree()) return static_cast<std::size_t>(prefix);
  return static_cast<std::size_t>(std::popcount(prefix));
}

int StoppingRule::stopping_step(std::uint64_t path) const {
  for (int k = 0; k <= lattice_.steps(); ++k) {
    if (stops(k, node_on_path(lattice_, path, k))) return k;
  }
  return lattice_.steps();
}

std::uint64_t StoppingRule::hash() const {
  return fnv1a(flags_.data(), flags_.size());
}

StoppingRule earliest(const StoppingRule& a, const StoppingRule& b) {
  if (!(a.lattice() == b.lattice())) {
    throw std::invalid_argument("stopping rules live on different lattices");
  }
  StoppingRule out = a;
  const Lattice& lat = a.lattice();
  for (int k = 0; k < lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      if (b.stops(k, i)) out.set(k, i, true);
    }
  }
  return out;
}

bool precedes(const StoppingRule& nu, const StoppingRule& tau) {
  if (!(nu.lattice() == tau.lattice())) {
    throw std::invalid_argument("stopping rules live on different lattices");
  }
  const Lattice& lat = nu.lattice();
  // Nodes reachable with neither rule stopped at an earlier node.
  std::vector<std::uint8_t> live(lat.node_count(), 0);
  live[0] = 1;
  for (int k = 0; k <= lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const std::size_t id = lat.offset(k) + i;
      if (!live[id]) continue;
      if (tau.stops(k, i) && !nu.stops(k, i)) return false;
      if (k == lat.steps() || tau.stops(k, i) || nu.stops(k, i)) continue;
      live[lat.offset(k + 1) + lat.down_child(k, i)] = 1;
      live[lat.offset(k + 1) + lat.up_child(k, i)] = 1;
    }
  }
  return true;
}

std::vector<StopPhase> stop_phase(const StoppingRule& rule) {
  const Lattice& lat = rule.lattice();
  std::vector<std::uint8_t> before(lat.node_count(), 0);
  std::vector<std::uint8_t> after(lat.node_count(), 0);
  before[0] = rule.stops(0, 0) ? 0 : 1;
  after[0] = rule.stops(0, 0) ? 1 : 0;
  for (int k = 0; k < lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const std::size_t id = lat.offset(k) + i;
      for (std::size_t c : {lat.down_child(k, i), lat.up_child(k, i)}) {
        const std::size_t cid = lat.offset(k + 1) + c;
        const bool flag = rule.stops(k + 1, c);
        if (after[id]) after[cid] = 1;
        if (before[id]) {
          if (flag) after[cid] = 1;
          else before[cid] = 1;
        }
      }
    }
  }
  std::vector<StopPhase> out(lat.node_count());
  for (std::size_t id = 0; id < out.size(); ++id) {
    if (before[id] && after[id]) out[id] = StopPhase::mixed;
    else if (after[id]) out[id] = StopPhase::at_or_after;
    else out[id] = StopPhase::before;
  }
  return out;
}

std::vector<std::size_t> stopping_ancestor(const StoppingRule& rule) {
  const Lattice& lat = rule.lattice();
  if (!lat.is_full_tree()) {
    throw std::invalid_argument("stopping ancestors need a full-tree lattice");
  }
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> anc(lat.node_count(), none);
  for (int k = 0; k <= lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const std::size_t id = lat.offset(k) + i;
      std::size_t inherited = none;
      if (k > 0) inherited = anc[lat.offset(k - 1) + lat.parent(k, i)];
      if (inherited != none) {
        anc[id] = inherited;
      } else if (rule.stops(k, i)) {
        anc[id] = id;
      }
    }
  }
  return anc;
}

}  // namespace drbsde

namespace drbsde {

std::uint64_t count_stopping_rules(int depth) {
  if (depth < 0) throw std::invalid_argument("negative tree depth");
  std::uint64_t s = 1;
  for (int d = 1; d <= depth; ++d) {
    if (s > 0xFFFFFFFFULL) throw std::overflow_error("stopping-rule count overflows 64 bits");
    s = 1 + s * s;
  }
  return s;
}

namespace {

using FlagSet = std::vector<std::size_t>;

// Canonical rules of the subtree rooted at (k, i), as lists of flagged
// interior node ids.
std::vector<FlagSet> subtree_rules(const Lattice& lat, int k, std::size_t i) {
  if (k == lat.steps()) return {FlagSet{}};
  std::vector<FlagSet> out;
  out.push_back(FlagSet{lat.offset(k) + i});
  const auto down = subtree_rules(lat, k + 1, lat.down_child(k, i));
  const auto up = subtree_rules(lat, k + 1, lat.up_child(k, i));
  out.reserve(1 + down.size() * up.size());
  for (const auto& d : down) {
    for (const auto& u : up) {
      FlagSet f = d;
      f.insert(f.end(), u.begin(), u.end());
      out.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace

std::vector<StoppingRule> enumerate_stopping_rules(const Lattice& lattice) {
  if (!lattice.is_full_tree()) {
    throw std::invalid_argument("stopping-rule enumeration needs a full-tree lattice");
  }
  if (lattice.steps() > kMaxEnumerationSteps) {
    throw std::length_error("stopping-rule enumeration limited to " +
                            std::to_string(kMaxEnumerationSteps) + " steps, got " +
                            std::to_string(lattice.steps()));
  }
  const auto sets = subtree_rules(lattice, 0, 0);
  std::vector<StoppingRule> rules;
  rules.reserve(sets.size());
  for (const auto& set : sets) {
    StoppingRule r(lattice);
    for (std::size_t id : set) {
      // Recover (k, i) from the flat id: offsets are 2^k - 1 on a full tree.
      int k = 0;
      while (lattice.offset(k + 1) <= id) ++k;
      r.set(k, id - lattice.offset(k), true);
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

}  // namespace drbsde
