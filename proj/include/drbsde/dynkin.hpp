#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "drbsde/doubly_reflected.hpp"

namespace drbsde {

/// R(tau, gamma) along one path, given as N bits (first move most
/// significant, 1 = up): L at tau's node when tau stops strictly first, U at
/// gamma's node when gamma stops first or together before the horizon, xi
/// when both reach the horizon.
double payoff_R(const StoppingRule& tau, const StoppingRule& gamma, std::uint64_t path,
                const DynkinGame& game);

/// R read at the nodes where tau ^ gamma stops; zero elsewhere.
AdaptedProcess payoff_process(const StoppingRule& tau, const StoppingRule& gamma,
                              const DynkinGame& game);

/// E^g_{0, tau ^ gamma}[R(tau, gamma)] at the root. Full tree only.
double strategy_value(const Lattice& lattice, const DynkinGame& game, const StoppingRule& tau,
                      const StoppingRule& gamma, Scheme scheme = Scheme::explicit_euler);

struct GameReport {
  double y0 = 0.0;
  double sup_inf = 0.0;
  double inf_sup = 0.0;
  /// max(|sup_inf - y0|, |inf_sup - y0|)
  double oracle_gap = 0.0;
  std::size_t rule_count = 0;
  /// Enumeration indices of the attaining pair; first in enumeration order.
  std::size_t tau_hat = 0;
  std::size_t gamma_hat = 0;
  std::uint64_t tau_hat_hash = 0;
  std::uint64_t gamma_hat_hash = 0;
  std::uint64_t tau_star_hash = 0;
  std::uint64_t gamma_star_hash = 0;
  /// Largest violation of the two saddle inequalities over all deviations.
  double saddle_violation = 0.0;
  /// |strategy_value(tau*, gamma*) - y0|
  double saddle_value_gap = 0.0;
  /// Largest violation of the sub/supermartingale sandwich at sampled nu.
  double sandwich_violation = 0.0;
  std::size_t sampled_starts = 0;
  double tolerance = 1e-10;
  bool oracle_checked = false;
  bool saddle_checked = false;
  bool pass = false;
};

struct PairTable {
  std::size_t rules = 0;
  std::vector<double> values;  ///< row = tau index, column = gamma index
};

/// Absolute tolerance, loosened in proportion when the obstacle scale exceeds
/// 1e3 so that comparisons act on rescaled values.
double game_tolerance(const DynkinGame& game, double base = 1e-10);

/// Values every pair of canonical rules and reports sup-inf, inf-sup and the
/// gap to solve_drbsde. `jobs` splits the table by rows; the reduction order
/// is fixed. Full tree with at most 4 steps.
GameReport game_value_oracle(const Lattice& lattice, const DynkinGame& game,
                             Scheme scheme = Scheme::explicit_euler, int jobs = 1,
                             PairTable* table = nullptr);

/// Saddle checks of the hitting-time pair (tau*, gamma*) of `solution` against
/// every enumerated deviation, plus the sandwich at `samples` random starting
/// rules.
GameReport verify_saddle(const Lattice& lattice, const DynkinGame& game, const Solution& solution,
                         Scheme scheme = Scheme::explicit_euler, std::size_t samples = 20,
                         std::uint64_t seed = 11);

/// Oracle and saddle checks merged into one report.
GameReport verify_game(const Lattice& lattice, const DynkinGame& game,
                       Scheme scheme = Scheme::explicit_euler, int jobs = 1);

std::string game_report_json(const GameReport& report);
/// CSV with columns tau,gamma,value.
void write_pair_table_csv(std::ostream& out, const PairTable& table);

}  // namespace drbsde
