#include "drbsde/doubly_reflected.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"

namespace drbsde {
namespace {

using testing::random_game;
using testing::uniform;

Generator nonlinear() { return sine_generator(-1.0, 0.5); }

// Obstacles Lipschitz in time and state, both binding.
DynkinGame smooth_game(const Lattice& lat, std::mt19937_64& rng, const Generator& g) {
  const double a = uniform(rng, 0.2, 0.5), b = uniform(rng, 0.2, 0.5), w = uniform(rng, 0.5, 2.0);
  const AdaptedProcess lower = AdaptedProcess::from_function(
      lat, [&](double t, double x) { return -a + 0.3 * std::sin(w * x + t); });
  const AdaptedProcess upper = AdaptedProcess::from_function(
      lat, [&](double t, double x) { return b + 0.2 * std::cos(w * x - t); });
  const int n = lat.steps();
  std::vector<double> xi(lat.nodes_at(n));
  for (std::size_t i = 0; i < xi.size(); ++i) {
    xi[i] = std::clamp(1.5 * lat.state(n, i), lower(n, i), upper(n, i));
  }
  return DynkinGame{TerminalPayoff(lat, xi), g, lower, upper};
}

TEST(Drbsde, StaysBetweenTheObstaclesWithFlatOff) {
  std::mt19937_64 rng(1);
  for (int s = 0; s < 20; ++s) {
    const Lattice lat = Lattice::build(1.0, 10 + s, LatticeMode::recombining);
    const DynkinGame game = random_game(lat, rng, nonlinear());
    for (auto scheme : {Scheme::explicit_euler, Scheme::implicit_euler}) {
      const Solution sol = solve_drbsde(lat, game, scheme);
      for (std::size_t id = 0; id < lat.node_count(); ++id) {
        const double y = sol.y.values()[id];
        const double dk = sol.dk.values()[id], dj = sol.dj.values()[id];
        EXPECT_GE(y, game.lower.values()[id]);
        EXPECT_LE(y, game.upper.values()[id]);
        EXPECT_GE(dk, 0.0);
        EXPECT_GE(dj, 0.0);
        EXPECT_FALSE(dk > 0 && dj > 0);
      }
      const FlatOffResidual f = flat_off_residual(sol);
      EXPECT_EQ(f.lower, 0.0);
      EXPECT_EQ(f.upper, 0.0);
    }
  }
}

TEST(Drbsde, FarObstacleReducesToOneObstacle) {
  std::mt19937_64 rng(4);
  const Lattice lat = Lattice::build(1.0, 16, LatticeMode::recombining);
  const DynkinGame game = random_game(lat, rng, nonlinear());
  DynkinGame lower_only = game;
  lower_only.upper = AdaptedProcess(lat, 1e6);
  EXPECT_EQ(max_abs_difference(solve_drbsde(lat, lower_only).y,
                               solve_rbsde(lat, game.xi, game.g, game.lower, ObstacleSide::lower).y),
            0.0);
  DynkinGame upper_only = game;
  upper_only.lower = AdaptedProcess(lat, -1e6);
  EXPECT_EQ(max_abs_difference(solve_drbsde(lat, upper_only).y,
                               solve_rbsde(lat, game.xi, game.g, game.upper, ObstacleSide::upper).y),
            0.0);
}

TEST(Drbsde, SignFlipSwapsTheObstacles) {
  std::mt19937_64 rng(6);
  for (int s = 0; s < 10; ++s) {
    const Lattice lat = Lattice::build(1.0, 12, LatticeMode::recombining);
    const DynkinGame game = random_game(lat, rng, sine_generator(uniform(rng, -1, 1), 0.5));
    const DynkinGame flipped{-game.xi, negate_reflect(game.g), -game.upper, -game.lower};
    const Solution a = solve_drbsde(lat, game);
    const Solution b = solve_drbsde(lat, flipped);
    EXPECT_LE(max_abs_difference(a.y, -b.y), 1e-12);
    EXPECT_LE(max_abs_difference(a.dk, b.dj), 1e-12);
  }
}

TEST(Drbsde, ValidationNamesTheNode) {
  const Lattice lat = Lattice::build(1.0, 4, LatticeMode::recombining);
  const TerminalPayoff xi(lat, std::vector<double>(5, 0.0));
  AdaptedProcess lower(lat, -1.0), upper(lat, 1.0);
  lower(2, 1) = 1.0;
  try {
    validate_game(lat, DynkinGame{xi, zero_generator(), lower, upper});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("step 2, node 1"), std::string::npos) << e.what();
  }
  lower(2, 1) = -1.0;
  const SeparationCheck ok = validate_game(lat, DynkinGame{xi, zero_generator(), lower, upper});
  EXPECT_EQ(ok.min_margin, 2.0);
  upper(4, 3) = -0.5;
  lower(4, 3) = -0.7;
  EXPECT_THROW(validate_game(lat, DynkinGame{xi, zero_generator(), lower, upper}),
               std::invalid_argument);
  EXPECT_THROW(pasting_construct(lat, DynkinGame{xi, zero_generator(), AdaptedProcess(lat, -1),
                                                 AdaptedProcess(lat, 1)}),
               std::invalid_argument);
  EXPECT_THROW(penalty_direction_from_string("sideways"), std::invalid_argument);
}

TEST(Pasting, AgreesWithTheDirectSolver) {
  std::mt19937_64 rng(2026);
  int deepest = 0;
  for (int s = 0; s < 20; ++s) {
    const int n = 3 + s % 6;
    const Lattice lat = Lattice::build(1.0, n, LatticeMode::full_tree);
    const DynkinGame game = random_game(lat, rng, s % 2 ? nonlinear() : zero_generator());
    for (auto scheme : {Scheme::explicit_euler, Scheme::implicit_euler}) {
      const Solution direct = solve_drbsde(lat, game, scheme);
      const PastingResult pasted = pasting_construct(lat, game, scheme);
      EXPECT_LE(max_abs_difference(direct.y, pasted.solution.y), 1e-10);
      EXPECT_LE(pasted.ledger.max_depth, n + 1);
      const FlatOffResidual f = flat_off_residual(pasted.solution);
      EXPECT_LE(f.lower, 1e-10);
      EXPECT_LE(f.upper, 1e-10);
      // Segment sides alternate with the index.
      for (const auto& seg : pasted.ledger.segments) {
        EXPECT_EQ(seg.side, seg.index % 2 ? ObstacleSide::lower : ObstacleSide::upper);
      }
      deepest = std::max(deepest, pasted.ledger.max_depth);
    }
  }
  EXPECT_GE(deepest, 3);
}

TEST(Pasting, ForcedAlternation) {
  // Obstacles that bind alternately: the lower one at odd steps, the upper
  // one at even steps, so every path crosses many segments.
  const int n = 6;
  const Lattice lat = Lattice::build(1.0, n, LatticeMode::full_tree);
  AdaptedProcess lower(lat), upper(lat);
  for (int k = 0; k <= n; ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      lower(k, i) = k % 2 ? 0.5 : -1.0;
      upper(k, i) = k % 2 ? 1.0 : -0.5;
    }
  }
  const TerminalPayoff xi(lat, std::vector<double>(lat.nodes_at(n), -0.5));
  const DynkinGame game{xi, zero_generator(), lower, upper};
  const PastingResult pasted = pasting_construct(lat, game);
  EXPECT_LE(max_abs_difference(solve_drbsde(lat, game).y, pasted.solution.y), 1e-12);
  EXPECT_GE(pasted.ledger.max_depth, n);
  EXPECT_LE(pasted.ledger.max_depth, n + 1);
  std::ostringstream csv;
  write_pasting_csv(csv, pasted.ledger);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "segment,side,start_hash,end_hash,node_count");
}

TEST(DoublePenalization, LevelsSqueezeTheSolution) {
  std::mt19937_64 rng(31);
  const auto schedule = default_penalty_schedule();
  ASSERT_EQ(schedule.size(), 11u);
  for (int s = 0; s < 6; ++s) {
    const Lattice lat = Lattice::build(1.0, 32, LatticeMode::recombining);
    const DynkinGame game = s < 3 ? smooth_game(lat, rng, nonlinear())
                                 : random_game(lat, rng, nonlinear());
    const Solution direct = solve_drbsde(lat, game);
    const auto inc = double_penalization(lat, game, schedule, PenaltyDirection::increasing);
    const auto dec = double_penalization(lat, game, schedule, PenaltyDirection::decreasing);
    for (std::size_t j = 0; j < schedule.size(); ++j) {
      EXPECT_EQ(inc.report.violations[j], 0u);
      EXPECT_EQ(dec.report.violations[j], 0u);
      EXPECT_EQ(inc.report.squeeze_violations[j], 0u);
      EXPECT_EQ(dec.report.squeeze_violations[j], 0u);
      EXPECT_LE(inc.report.sup_gap[j], inc.report.envelope[j] * (1 + 1e-12) + 1e-14);
      EXPECT_LE(dec.report.sup_gap[j], dec.report.envelope[j] * (1 + 1e-12) + 1e-14);
      for (std::size_t id = 0; id < lat.node_count(); ++id) {
        EXPECT_LE(inc.levels[j].y.values()[id], direct.y.values()[id] + 1e-12);
        EXPECT_GE(dec.levels[j].y.values()[id], direct.y.values()[id] - 1e-12);
      }
    }
    const double scale = 1 + direct.y.sup_norm();
    // Smooth obstacles leave a narrow squeeze at n = 1024; rough ones only
    // obey the envelopes.
    if (s < 3) {
      EXPECT_GT(direct.dk.sup_norm(), 0.0);
      EXPECT_GT(direct.dj.sup_norm(), 0.0);
      EXPECT_LE(max_abs_difference(inc.levels.back().y, dec.levels.back().y), 1e-2 * scale);
    }
    EXPECT_EQ(inc.report.converged, inc.report.final_gap <= 1e-6 * scale);
  }
}

TEST(CrossValidation, AllRoutesAgreeAndThreadsDoNotMatter) {
  std::mt19937_64 rng(77);
  for (int s = 0; s < 4; ++s) {
    const Lattice lat = Lattice::build(1.0, 7, LatticeMode::full_tree);
    const DynkinGame game = random_game(lat, rng, nonlinear());
    const CrossValidationReport one = cross_validate(lat, game);
    const CrossValidationReport four =
        cross_validate(lat, game, default_penalty_schedule(), Scheme::explicit_euler, 1e-10, 4);
    EXPECT_TRUE(one.pass);
    ASSERT_TRUE(one.direct_vs_pasting.has_value());
    EXPECT_LE(*one.direct_vs_pasting, 1e-10);
    EXPECT_LE(one.squeeze_excess, 0.0);
    EXPECT_EQ(cross_validation_json(one), cross_validation_json(four));
  }
  const Lattice rec = Lattice::build(1.0, 16, LatticeMode::recombining);
  const CrossValidationReport r = cross_validate(rec, random_game(rec, rng, nonlinear()));
  EXPECT_FALSE(r.y0_pasting.has_value());
  EXPECT_TRUE(r.pass);
}

}  // namespace
}  // namespace drbsde
