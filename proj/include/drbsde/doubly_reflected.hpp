#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drbsde/bsde.hpp"
#include "drbsde/rbsde.hpp"

namespace drbsde {

/// Datum (xi, g, L, U) of a doubly reflected equation, equivalently of the
/// Dynkin game with lower payoff L, upper payoff U and terminal payoff xi.
struct DynkinGame {
  TerminalPayoff xi;
  Generator g;
  AdaptedProcess lower;
  AdaptedProcess upper;
};

struct SeparationCheck {
  double min_margin = 0.0;  ///< min over nodes of U - L
  int step = 0;             ///< where the minimum is attained
  std::size_t node = 0;
  double scale = 1.0;       ///< 1 + max(|L|, |U|, |xi|)
};

/// Checks lattices, finiteness, L_T <= xi <= U_T and strict separation. Games
/// with margin below 1e-9 scale are rejected with the offending node.
SeparationCheck validate_game(const Lattice& lattice, const DynkinGame& game);

/// Y_N = xi, then Y_k = min(U_k, max(L_k, candidate)) with
/// dK = (L - candidate)^+ and dJ = (candidate - U)^+.
Solution solve_drbsde(const Lattice& lattice, const DynkinGame& game,
                      Scheme scheme = Scheme::explicit_euler);

enum class PenaltyDirection { increasing, decreasing };

const char* to_string(PenaltyDirection d);
PenaltyDirection penalty_direction_from_string(const std::string& name);

/// Increasing: reflect at U and penalize below L, so levels rise toward the
/// solution. Decreasing: reflect at L and penalize above U. The report's
/// squeeze_violations count nodes on the wrong side of solve_drbsde.
PenalizationRun double_penalization(const Lattice& lattice, const DynkinGame& game,
                                    const std::vector<double>& schedule,
                                    PenaltyDirection direction,
                                    Scheme scheme = Scheme::explicit_euler);

/// 2^0, 2^1, ..., 2^10.
std::vector<double> default_penalty_schedule();

struct PastingSegment {
  int index = 1;  ///< 1-based; odd segments reflect at L, even ones at U
  ObstacleSide side = ObstacleSide::lower;
  StoppingRule start;
  StoppingRule end;
  std::size_t node_count = 0;
};

struct PastingLedger {
  std::vector<PastingSegment> segments;
  /// Segments used per path, indexed by terminal node.
  std::vector<int> depth;
  int max_depth = 0;
};

struct PastingResult {
  Solution solution;
  PastingLedger ledger;
};

/// Builds the solution by alternating one-obstacle segments: reflect at L
/// until Y meets U, then at U until Y meets L, and so on, each segment taking
/// the continuation already built behind its end contact as terminal datum.
/// Full tree only.
PastingResult pasting_construct(const Lattice& lattice, const DynkinGame& game,
                                Scheme scheme = Scheme::explicit_euler,
                                std::optional<double> eps_hit = std::nullopt);

/// CSV with columns segment,side,start_hash,end_hash,node_count.
void write_pasting_csv(std::ostream& out, const PastingLedger& ledger);

struct CrossValidationReport {
  double y0_direct = 0.0;
  std::optional<double> y0_pasting;  ///< empty on a recombining lattice
  double y0_increasing = 0.0;
  double y0_decreasing = 0.0;
  double penalty_cap = 0.0;

  std::optional<double> direct_vs_pasting;
  double direct_vs_increasing = 0.0;
  double direct_vs_decreasing = 0.0;
  /// Largest amount by which an increasing level exceeds the decreasing level
  /// with the same n, over all levels.
  double squeeze_excess = 0.0;
  double max_pairwise_gap = 0.0;
  /// Closed-form bounds for the two penalization routes at the cap.
  double increasing_envelope = 0.0;
  double decreasing_envelope = 0.0;
  FlatOffResidual flat_off;
  std::optional<FlatOffResidual> pasting_flat_off;
  std::size_t monotonicity_violations = 0;
  std::size_t squeeze_violations = 0;
  bool pass = false;
};

/// Runs every route on the same game and compares them node-wise. `jobs` > 1
/// runs the routes on separate threads; the result does not depend on it.
CrossValidationReport cross_validate(const Lattice& lattice, const DynkinGame& game,
                                     const std::vector<double>& schedule =
                                         default_penalty_schedule(),
                                     Scheme scheme = Scheme::explicit_euler,
                                     double pasting_tolerance = 1e-10, int jobs = 1);

std::string cross_validation_json(const CrossValidationReport& report);

}  // namespace drbsde
