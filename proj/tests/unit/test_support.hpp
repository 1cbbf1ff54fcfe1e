#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "drbsde/doubly_reflected.hpp"
#include "drbsde/lattice.hpp"
#include "drbsde/stopping_rule.hpp"

namespace drbsde::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline AdaptedProcess random_process(const Lattice& lat, std::mt19937_64& rng, double lo,
                                     double hi) {
  AdaptedProcess p(lat);
  for (double& v : p.values()) v = uniform(rng, lo, hi);
  return p;
}

/// Random rule: each node flagged with probability p.
inline StoppingRule random_rule(const Lattice& lat, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution coin(p);
  return StoppingRule::from_predicate(lat, [&](const Node&) { return coin(rng); });
}

/// Strictly separated game with obstacles that bind on a good share of nodes.
inline DynkinGame random_game(const Lattice& lat, std::mt19937_64& rng, const Generator& g) {
  AdaptedProcess lower(lat), upper(lat);
  const double amp = uniform(rng, 0.2, 0.8);
  const double shift = uniform(rng, -0.3, 0.3);
  for (int k = 0; k <= lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const double x = lat.state(k, i);
      lower(k, i) = shift - amp + 0.3 * std::sin(1.7 * x + k) + uniform(rng, -0.1, 0.1);
      upper(k, i) = lower(k, i) + uniform(rng, 0.05, 1.2);
    }
  }
  std::vector<double> xi(lat.nodes_at(lat.steps()));
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const int n = lat.steps();
    xi[i] = std::clamp(0.8 * lat.state(n, i) + shift, lower(n, i), upper(n, i));
  }
  return DynkinGame{TerminalPayoff(lat, xi), g, lower, upper};
}

/// E[payoff at the stopping node] on a full tree by walking all 2^N paths;
/// the linear expectation, independent of the backward evaluators.
inline double path_average(const Lattice& lat, const StoppingRule& tau,
                           const AdaptedProcess& payoff) {
  const std::uint64_t paths = std::uint64_t{1} << lat.steps();
  double sum = 0.0;
  for (std::uint64_t p = 0; p < paths; ++p) {
    for (int k = 0; k <= lat.steps(); ++k) {
      const std::size_t i = node_on_path(lat, p, k);
      if (tau.stops(k, i)) {
        sum += payoff(k, i);
        break;
      }
    }
  }
  return sum / static_cast<double>(paths);
}

}  // namespace drbsde::testing
