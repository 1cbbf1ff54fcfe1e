#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drbsde/generator.hpp"

namespace drbsde {

/// Bound on M * N * d for simulate_paths.
inline constexpr std::size_t kMaxMcEntries = std::size_t{1} << 28;

/// Statistics of the standardized increments dB / sqrt(dt), pooled over
/// steps per coordinate.
struct SanityGate {
  std::vector<double> mean;      ///< per coordinate
  std::vector<double> variance;  ///< per coordinate, in units of dt
  double max_cross_correlation = 0.0;
  double mean_bound = 0.0;  ///< 3 / sqrt(M)
  bool pass = false;
};

/// M Brownian paths of N steps in dimension d started at 0. Path m draws its
/// increments from its own generator seeded from (seed, m), so any subset of
/// paths is reproducible on its own.
struct PathBundle {
  int dim = 1;
  double horizon = 1.0;
  int steps = 1;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> increments;  ///< [path][step][coordinate]
  std::vector<double> states;      ///< [path][step 0..N][coordinate]
  SanityGate gate;

  double dt() const { return horizon / steps; }
  double increment(std::size_t m, int k, int c) const {
    return increments[(m * steps + k) * dim + c];
  }
  std::span<const double> state(std::size_t m, int k) const {
    return {states.data() + (m * (steps + 1) + k) * dim, static_cast<std::size_t>(dim)};
  }
};

PathBundle simulate_paths(int dim, double horizon, int steps, std::size_t paths,
                          std::uint64_t seed, int jobs = 1);

enum class BasisFamily { polynomial, indicator_bins };

/// Polynomial: products of Hermite polynomials He_j of the standardized state
/// x / sqrt(t) with total degree <= degree. Indicator bins: equal bins of the
/// standardized first coordinate on [-3, 3], outer bins unbounded.
struct RegressionBasis {
  BasisFamily family = BasisFamily::polynomial;
  int degree = 3;
  int bins = 10;

  std::size_t size(int dim) const;
  void evaluate(std::span<const double> standardized, std::span<double> out) const;
  std::string describe() const;
};

/// Obstacles and terminal payoff as functions of (t, x in R^d). A missing
/// obstacle is never binding.
struct McProblem {
  std::function<double(std::span<const double>)> terminal;
  std::function<double(double, std::span<const double>)> lower;
  std::function<double(double, std::span<const double>)> upper;
  /// When set, obstacles act through the closed-form penalty step with this
  /// level instead of a projection.
  std::optional<double> penalty;
};

struct McOptions {
  /// Disjoint path groups for the standard error; each keeps at least
  /// max(100, 10 p) paths for a basis of size p.
  std::size_t batches = 20;
  double condition_warning = 1e8;
  int jobs = 1;
};

struct McResult {
  double y0 = 0.0;
  double standard_error = 0.0;
  double max_condition = 0.0;
  int worst_condition_step = 0;
  /// Largest path-wise flat-off sums.
  double flat_off_lower = 0.0;
  double flat_off_upper = 0.0;
  /// Path values outside [L, U] after the reflection.
  std::size_t obstacle_violations = 0;
  std::vector<std::string> warnings;
};

/// Explicit backward recursion with conditional expectations replaced by least
/// squares on the basis: per step regress Y_{k+1} and Y_{k+1} dB_k / dt, form
/// the candidate, then reflect (or penalize) path-wise. The first step uses
/// plain sample means since every path starts at 0. The standard error is
/// the spread of Y_0 over the batches, each solved from scratch. The
/// generator sees the first coordinate of the state and of Z.
McResult solve_mc(const PathBundle& paths, const McProblem& problem, const Generator& g,
                  const RegressionBasis& basis, const McOptions& options = {});

/// CSV with columns path,k,coordinate,increment,state.
void write_bundle_csv(std::ostream& out, const PathBundle& paths);
std::string mc_result_json(const McResult& r, const PathBundle& paths,
                           const RegressionBasis& basis);

}  // namespace drbsde
