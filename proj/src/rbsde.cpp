#include "drbsde/rbsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "drbsde/detail/backward.hpp"
#include "drbsde/io.hpp"

namespace drbsde {

const char* to_string(ObstacleSide side) { return side == ObstacleSide::lower ? "lower" : "upper"; }

ObstacleSide obstacle_side_from_string(const std::string& name) {
  if (name == "lower") return ObstacleSide::lower;
  if (name == "upper") return ObstacleSide::upper;
  throw std::invalid_argument("unknown obstacle side '" + name + "' (expected lower or upper)");
}

namespace {

void check_terminal_order(const TerminalPayoff& xi, const AdaptedProcess& obstacle,
                          ObstacleSide side) {
  const Lattice& lat = obstacle.lattice();
  const int n = lat.steps();
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double bound = obstacle(n, i);
    const bool bad = side == ObstacleSide::lower ? bound > xi[i] : xi[i] > bound;
    if (bad) {
      throw std::invalid_argument(
          std::string(side == ObstacleSide::lower ? "lower obstacle exceeds" : "upper obstacle is below") +
          " the terminal payoff at terminal node " + std::to_string(i) + " (obstacle " +
          format_real(bound) + ", payoff " + format_real(xi[i]) + ")");
    }
  }
}

void check_inputs(const Lattice& lattice, const TerminalPayoff& xi, const AdaptedProcess& obstacle,
                  ObstacleSide side) {
  detail::require_same_lattice(lattice, xi.lattice(), "terminal payoff");
  detail::require_same_lattice(lattice, obstacle.lattice(), "obstacle");
  detail::require_finite(obstacle, "obstacle");
  check_terminal_order(xi, obstacle, side);
}

double scale_of(const Solution& s) { return 1.0 + s.y.sup_norm(); }

}  // namespace

Solution solve_rbsde(const Lattice& lattice, const TerminalPayoff& xi, const Generator& g,
                     const AdaptedProcess& obstacle, ObstacleSide side, Scheme scheme) {
  check_inputs(lattice, xi, obstacle, side);
  Solution s = side == ObstacleSide::lower
                   ? detail::backward_solve(lattice, xi, g, scheme, SolutionKind::reflected_lower,
                                            [&](const Node& x, double a) {
                                              const double l = obstacle.at(x);
                                              return a < l ? detail::Projected{l, l - a, 0.0}
                                                           : detail::Projected{a, 0.0, 0.0};
                                            })
                   : detail::backward_solve(lattice, xi, g, scheme, SolutionKind::reflected_upper,
                                            [&](const Node& x, double a) {
                                              const double u = obstacle.at(x);
                                              return a > u ? detail::Projected{u, 0.0, a - u}
                                                           : detail::Projected{a, 0.0, 0.0};
                                            });
  (side == ObstacleSide::lower ? s.lower : s.upper) = obstacle;
  return s;
}

double penalized_value(double candidate, double obstacle, double dt, double n, ObstacleSide side) {
  const double w = dt * n;
  if (side == ObstacleSide::lower) {
    return candidate < obstacle ? (candidate + w * obstacle) / (1.0 + w) : candidate;
  }
  return candidate > obstacle ? (candidate + w * obstacle) / (1.0 + w) : candidate;
}

void validate_schedule(const std::vector<double>& schedule) {
  if (schedule.empty()) throw std::invalid_argument("penalty schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!std::isfinite(schedule[i]) || schedule[i] < 0.0) {
      throw std::invalid_argument("penalty level " + format_real(schedule[i]) +
                                  " must be finite and nonnegative");
    }
    if (i > 0 && !(schedule[i] > schedule[i - 1])) {
      throw std::invalid_argument("penalty schedule must be strictly increasing");
    }
  }
}

double step_growth_factor(const Generator& g, const Lattice& lattice, Scheme scheme) {
  const double a = lattice.dt() * g.lambda_plus();
  const double n = lattice.steps();
  if (scheme == Scheme::explicit_euler) return std::pow(1.0 + a, n);
  return std::pow(1.0 - a, -n);
}

double monotonicity_slack(double scale) { return 1e-12 * scale; }

double default_hit_tolerance(const Solution& s) { return 1e-9 * scale_of(s); }

PenalizationRun penalization_run(const Lattice& lattice, const TerminalPayoff& xi,
                                 const Generator& g, const AdaptedProcess& obstacle,
                                 ObstacleSide side, const std::vector<double>& schedule,
                                 Scheme scheme) {
  validate_schedule(schedule);
  const Solution reflected = solve_rbsde(lattice, xi, g, obstacle, side, scheme);
  const double dt = lattice.dt();
  const double sign = side == ObstacleSide::lower ? 1.0 : -1.0;

  // Largest one-step overshoot of the reflected solution's candidate.
  double overshoot = 0.0;
  for (double v : (side == ObstacleSide::lower ? reflected.dk : reflected.dj).values()) {
    overshoot = std::max(overshoot, v);
  }
  const double growth = step_growth_factor(g, lattice, scheme);
  const double scale = scale_of(reflected);
  const double slack = monotonicity_slack(scale);

  PenalizationRun run;
  PenalizationReport& rep = run.report;
  rep.side = side;
  rep.schedule = schedule;
  rep.tolerance = 1e-6 * scale;
  run.levels.reserve(schedule.size());
  for (double n : schedule) {
    Solution level = detail::backward_solve(
        lattice, xi, g, scheme, SolutionKind::plain, [&](const Node& x, double a) {
          const double y = penalized_value(a, obstacle.at(x), dt, n, side);
          return side == ObstacleSide::lower ? detail::Projected{y, y - a, 0.0}
                                             : detail::Projected{y, 0.0, a - y};
        });
    (side == ObstacleSide::lower ? level.lower : level.upper) = obstacle;

    const auto cur = level.y.values();
    const auto ref = reflected.y.values();
    std::size_t violations = 0;
    std::size_t squeeze = 0;
    if (!run.levels.empty()) {
      const auto prev = run.levels.back().y.values();
      for (std::size_t id = 0; id < cur.size(); ++id) {
        if (sign * (cur[id] - prev[id]) < -slack) ++violations;
      }
    }
    double gap = 0.0;
    for (std::size_t id = 0; id < cur.size(); ++id) {
      gap = std::max(gap, std::abs(cur[id] - ref[id]));
      if (sign * (cur[id] - ref[id]) > slack) ++squeeze;
    }
    const double q = 1.0 / (1.0 + dt * n);
    const double steps = lattice.steps();
    const double sum = n > 0.0 ? (1.0 - std::pow(q, steps)) / (dt * n) : steps;
    rep.sup_gap.push_back(gap);
    rep.violations.push_back(violations);
    rep.squeeze_violations.push_back(squeeze);
    rep.envelope.push_back(growth * overshoot * sum);
    run.levels.push_back(std::move(level));
  }
  rep.final_gap = rep.sup_gap.back();
  rep.converged = rep.final_gap <= rep.tolerance;
  return run;
}

StoppingRule first_hitting(const Solution& s, const StoppingRule& nu, ObstacleSide target,
                           std::optional<double> eps_hit) {
  const Lattice& lat = s.lattice();
  detail::require_same_lattice(lat, nu.lattice(), "starting rule");
  const auto& obstacle = target == ObstacleSide::lower ? s.lower : s.upper;
  if (!obstacle) {
    throw std::invalid_argument(std::string("solution carries no ") + to_string(target) +
                                " obstacle");
  }
  const double eps = eps_hit.value_or(default_hit_tolerance(s));
  if (!(eps >= 0.0)) throw std::invalid_argument("hitting tolerance must be nonnegative");

  const auto phase = stop_phase(nu);
  StoppingRule out(lat);
  for (int k = 0; k < lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const double y = s.y(k, i);
      const double b = (*obstacle)(k, i);
      const bool hit = target == ObstacleSide::lower ? y <= b + eps : y >= b - eps;
      if (!hit) continue;
      const StopPhase p = phase[lat.offset(k) + i];
      if (p == StopPhase::mixed) {
        throw std::invalid_argument("starting rule is not node based at step " +
                                    std::to_string(k) + ", node " + std::to_string(i));
      }
      if (p == StopPhase::at_or_after) out.set(k, i, true);
    }
  }
  return out.canonical();
}

FlatOffResidual flat_off_residual(const Solution& s) {
  const Lattice& lat = s.lattice();
  auto worst_path = [&](const std::optional<AdaptedProcess>& obstacle, const AdaptedProcess& inc) {
    if (!obstacle) return 0.0;
    std::vector<double> best(lat.nodes_at(lat.steps()), 0.0);
    for (int k = lat.steps() - 1; k >= 0; --k) {
      std::vector<double> here(lat.nodes_at(k));
      for (std::size_t i = 0; i < here.size(); ++i) {
        const double term = std::abs(s.y(k, i) - (*obstacle)(k, i)) * inc(k, i);
        here[i] = term + std::max(best[lat.up_child(k, i)], best[lat.down_child(k, i)]);
      }
      best = std::move(here);
    }
    return best[0];
  };
  return {worst_path(s.lower, s.dk), worst_path(s.upper, s.dj)};
}

namespace {

struct SnellSetup {
  ObstacleSide side;
  double sign;
  const AdaptedProcess* obstacle;
  AdaptedProcess reward;
};

SnellSetup snell_setup(const Solution& s, const TerminalPayoff& xi) {
  SnellSetup out{ObstacleSide::lower, 1.0, nullptr, AdaptedProcess(s.lattice())};
  if (s.kind == SolutionKind::reflected_lower && s.lower) {
    out.obstacle = &*s.lower;
  } else if (s.kind == SolutionKind::reflected_upper && s.upper) {
    out.side = ObstacleSide::upper;
    out.sign = -1.0;
    out.obstacle = &*s.upper;
  } else {
    throw std::invalid_argument("Snell check needs a one-obstacle solution");
  }
  out.reward = *out.obstacle;
  const int n = s.lattice().steps();
  auto last = out.reward.step(n);
  for (std::size_t i = 0; i < last.size(); ++i) last[i] = xi[i];
  return out;
}

// Sandwich around nu: E_{nu,gamma}[Y] on the right side of Y_nu, with equality
// when gamma is cut at the first contact after nu.
void sandwich(const Solution& s, const SnellSetup& setup, StoppedEvaluator& eval,
              const StoppingRule& nu, const StoppingRule& gamma, SnellReport& rep) {
  const StoppingRule sharp = first_hitting(s, nu, setup.side, 0.0);
  const auto live = nu.reachable_unstopped();
  std::vector<double> plain(s.y.values().begin(), s.y.values().end());
  std::vector<double> cut = plain;
  eval.evaluate(gamma.flags(), plain);
  eval.evaluate(earliest(sharp, gamma).flags(), cut);
  for (std::size_t id = 0; id < plain.size(); ++id) {
    if (!live[id] || !nu.flags()[id]) continue;
    const double y = s.y.values()[id];
    rep.supermartingale_violation =
        std::max(rep.supermartingale_violation, setup.sign * (plain[id] - y));
    rep.martingale_gap = std::max(rep.martingale_gap, std::abs(cut[id] - y));
  }
}

}  // namespace

SnellReport verify_snell(const Lattice& lattice, const Solution& s, const TerminalPayoff& xi,
                         const Generator& g, SnellMode mode, Scheme scheme, double tolerance,
                         std::uint64_t seed) {
  detail::require_same_lattice(lattice, s.lattice(), "solution");
  detail::require_same_lattice(lattice, xi.lattice(), "terminal payoff");
  const SnellSetup setup = snell_setup(s, xi);
  SnellReport rep;
  rep.mode = mode;
  StoppedEvaluator eval(lattice, g, scheme);
  const int n = lattice.steps();

  if (mode == SnellMode::backward) {
    BackwardStep step(lattice, g, scheme);
    AdaptedProcess env = setup.reward;
    for (int k = n - 1; k >= 0; --k) {
      for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
        const double a = step(lattice.node(k, i), env(k + 1, lattice.up_child(k, i)),
                              env(k + 1, lattice.down_child(k, i)))
                             .y;
        const double r = setup.reward(k, i);
        env(k, i) = setup.side == ObstacleSide::lower ? std::max(r, a) : std::min(r, a);
      }
    }
    rep.value_gap = max_abs_difference(env, s.y);
    rep.enumerated_value = env(0, 0);

    // Sandwich at every deterministic time against random rules after it.
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.3);
    for (int k = 0; k <= n; ++k) {
      const StoppingRule nu = StoppingRule::at_step(lattice, k);
      std::vector<StoppingRule> gammas{nu, StoppingRule(lattice)};
      for (int r = 0; r < 8; ++r) {
        gammas.push_back(StoppingRule::from_predicate(
            lattice, [&](const Node& x) { return x.step >= k && coin(rng); }));
      }
      for (const auto& gamma : gammas) {
        sandwich(s, setup, eval, nu, gamma, rep);
        ++rep.rules_checked;
      }
    }
  } else {
    const auto rules = enumerate_stopping_rules(lattice);
    const StoppingRule root = StoppingRule::at_step(lattice, 0);
    double best = setup.side == ObstacleSide::lower ? -std::numeric_limits<double>::infinity()
                                                    : std::numeric_limits<double>::infinity();
    std::vector<double> values(lattice.node_count());
    for (const auto& gamma : rules) {
      std::copy(setup.reward.values().begin(), setup.reward.values().end(), values.begin());
      eval.evaluate(gamma.flags(), values);
      best = setup.side == ObstacleSide::lower ? std::max(best, values[0])
                                               : std::min(best, values[0]);
      sandwich(s, setup, eval, root, gamma, rep);
      ++rep.rules_checked;
    }
    rep.enumerated_value = best;
    rep.value_gap = std::abs(best - s.y(0, 0));
  }
  rep.pass = rep.value_gap <= tolerance && rep.supermartingale_violation <= tolerance &&
             rep.martingale_gap <= tolerance;
  return rep;
}

void write_penalization_csv(std::ostream& out, const PenalizationReport& report) {
  out << "n,sup_gap,violations\n";
  for (std::size_t i = 0; i < report.schedule.size(); ++i) {
    out << format_real(report.schedule[i]) << ',' << format_real(report.sup_gap[i]) << ','
        << report.violations[i] << '\n';
  }
}

}  // namespace drbsde
