#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "drbsde/bsde.hpp"
#include "drbsde/io.hpp"

namespace drbsde::detail {

/// Output of a per-node projection applied to a plain-step candidate.
struct Projected {
  double y;
  double dk = 0.0;
  double dj = 0.0;
};

/// Backward induction with Y_N = xi and, at each node, the plain BSDE step
/// followed by `project(node, candidate)`.
template <class Project>
Solution backward_solve(const Lattice& lattice, const TerminalPayoff& xi, const Generator& g,
                        Scheme scheme, SolutionKind kind, Project&& project) {
  if (!(xi.lattice() == lattice)) {
    throw std::invalid_argument("terminal payoff lives on a different lattice");
  }
  Solution s(kind, lattice);
  BackwardStep step(lattice, g, scheme);
  const int n = lattice.steps();
  auto last = s.y.step(n);
  for (std::size_t i = 0; i < last.size(); ++i) last[i] = xi[i];
  for (int k = n - 1; k >= 0; --k) {
    const auto next = s.y.step(k + 1);
    auto yk = s.y.step(k);
    auto zk = s.z.step(k);
    auto dk = s.dk.step(k);
    auto dj = s.dj.step(k);
    for (std::size_t i = 0; i < yk.size(); ++i) {
      const Node node = lattice.node(k, i);
      const StepValue v = step(node, next[lattice.up_child(k, i)], next[lattice.down_child(k, i)]);
      const Projected p = project(node, v.y);
      yk[i] = p.y;
      zk[i] = v.z;
      dk[i] = p.dk;
      dj[i] = p.dj;
    }
  }
  s.meta = step.metadata();
  return s;
}

inline void require_finite(const AdaptedProcess& x, const char* what) {
  const Lattice& lat = x.lattice();
  for (int k = 0; k <= lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      if (!std::isfinite(x(k, i))) {
        throw std::invalid_argument(std::string(what) + " is undefined at step " +
                                    std::to_string(k) + ", node " + std::to_string(i));
      }
    }
  }
}

inline void require_same_lattice(const Lattice& a, const Lattice& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + " lives on a different lattice");
}

}  // namespace drbsde::detail
