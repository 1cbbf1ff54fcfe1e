#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "drbsde/bsde.hpp"

namespace drbsde {

enum class ObstacleSide { lower, upper };

const char* to_string(ObstacleSide side);
ObstacleSide obstacle_side_from_string(const std::string& name);

/// Reflected BSDE with one obstacle. Lower side: Y_k = max(L_k, candidate),
/// dK_k = Y_k - candidate. Upper side: Y_k = min(U_k, candidate),
/// dJ_k = candidate - Y_k. Flat-off holds exactly since every nonzero
/// increment coincides with Y sitting on the obstacle.
Solution solve_rbsde(const Lattice& lattice, const TerminalPayoff& xi, const Generator& g,
                     const AdaptedProcess& obstacle, ObstacleSide side,
                     Scheme scheme = Scheme::explicit_euler);

/// Closed-form implicit penalty step. Lower side: solves
/// y = a + dt n (y - L)^-, i.e. y = (a + dt n L) / (1 + dt n) below the
/// obstacle and y = a above it. Upper side mirrors it.
double penalized_value(double candidate, double obstacle, double dt, double n, ObstacleSide side);

struct PenalizationReport {
  ObstacleSide side = ObstacleSide::lower;
  std::vector<double> schedule;
  /// Sup-norm gap of each level to the reflected solution.
  std::vector<double> sup_gap;
  /// Nodes where a level moved against the expected direction relative to
  /// the previous level (zero for the first level).
  std::vector<std::size_t> violations;
  /// Closed-form bound on sup_gap. With o the largest one-step overshoot
  /// (obstacle - candidate)^+ of the reflected solution, q = 1 / (1 + dt n)
  /// and G the growth factor of the unpenalized step over the horizon:
  /// G o q (1 + q + ... + q^(N-1)), i.e. G o (1 - q^N) / (dt n).
  std::vector<double> envelope;
  /// Nodes on the wrong side of the reflected solution (used by the
  /// two-sided schemes; always zero for one obstacle).
  std::vector<std::size_t> squeeze_violations;
  bool converged = false;
  double final_gap = 0.0;
  double tolerance = 0.0;
};

struct PenalizationRun {
  std::vector<Solution> levels;
  PenalizationReport report;
};

/// Solves the penalized equation for every level of `schedule` and compares
/// each level with solve_rbsde.
PenalizationRun penalization_run(const Lattice& lattice, const TerminalPayoff& xi,
                                 const Generator& g, const AdaptedProcess& obstacle,
                                 ObstacleSide side, const std::vector<double>& schedule,
                                 Scheme scheme = Scheme::explicit_euler);

/// Rejects empty, negative, non-finite or non-increasing schedules.
void validate_schedule(const std::vector<double>& schedule);

/// Sup-norm growth of the unpenalized one-step map over the whole horizon.
double step_growth_factor(const Generator& g, const Lattice& lattice, Scheme scheme);

/// Slack used when counting monotonicity violations between levels.
double monotonicity_slack(double scale);

/// 1e-9 (1 + |Y|_inf).
double default_hit_tolerance(const Solution& s);

/// First node at or after nu where Y <= L + eps (lower) or Y >= U - eps
/// (upper); terminal nodes always stop.
StoppingRule first_hitting(const Solution& s, const StoppingRule& nu, ObstacleSide target,
                           std::optional<double> eps_hit = std::nullopt);

/// Largest per-path flat-off sum: max over paths of sum_k |Y_k - L_k| dK_k
/// (and the same for U and dJ). Zero exactly when flat-off holds on every
/// path.
struct FlatOffResidual {
  double lower = 0.0;
  double upper = 0.0;
};
FlatOffResidual flat_off_residual(const Solution& s);

enum class SnellMode { backward, enumerate };

struct SnellReport {
  SnellMode mode = SnellMode::backward;
  /// backward: node-wise gap to an independent recursion.
  /// enumerate: |max over rules of E^g_{0,gamma}[R_gamma] - Y_0|.
  double value_gap = 0.0;
  double enumerated_value = 0.0;
  std::size_t rules_checked = 0;
  /// Largest E^g_{nu,gamma}[Y_gamma] - Y_nu seen (supermartingale side).
  double supermartingale_violation = 0.0;
  /// Largest |E^g_{nu, tau# ^ gamma}[Y] - Y_nu| (martingale side).
  double martingale_gap = 0.0;
  bool pass = false;
};

/// Checks that a one-obstacle solution is the Snell envelope of
/// R = 1{t<T} obstacle + 1{t=T} xi under the g-evaluation. Enumerate mode
/// needs a full tree with at most 4 steps.
SnellReport verify_snell(const Lattice& lattice, const Solution& s, const TerminalPayoff& xi,
                         const Generator& g, SnellMode mode,
                         Scheme scheme = Scheme::explicit_euler, double tolerance = 1e-10,
                         std::uint64_t seed = 7);

/// CSV with columns n,sup_gap,violations.
void write_penalization_csv(std::ostream& out, const PenalizationReport& report);

}  // namespace drbsde
