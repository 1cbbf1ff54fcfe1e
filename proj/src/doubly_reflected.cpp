#include "drbsde/doubly_reflected.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "drbsde/detail/backward.hpp"
#include "drbsde/io.hpp"

namespace drbsde {

namespace {

std::string at_node(int k, std::size_t i) {
  return "step " + std::to_string(k) + ", node " + std::to_string(i);
}

}  // namespace

SeparationCheck validate_game(const Lattice& lattice, const DynkinGame& game) {
  detail::require_same_lattice(lattice, game.xi.lattice(), "terminal payoff");
  detail::require_same_lattice(lattice, game.lower.lattice(), "lower obstacle");
  detail::require_same_lattice(lattice, game.upper.lattice(), "upper obstacle");
  detail::require_finite(game.lower, "lower obstacle");
  detail::require_finite(game.upper, "upper obstacle");

  SeparationCheck check;
  double size = 0.0;
  for (double v : game.xi.values()) size = std::max(size, std::abs(v));
  size = std::max({size, game.lower.sup_norm(), game.upper.sup_norm()});
  check.scale = 1.0 + size;

  const int n = lattice.steps();
  check.min_margin = INFINITY;
  for (int k = 0; k <= n; ++k) {
    for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
      const double margin = game.upper(k, i) - game.lower(k, i);
      if (margin < check.min_margin) {
        check.min_margin = margin;
        check.step = k;
        check.node = i;
      }
    }
  }
  if (check.min_margin < 1e-9 * check.scale) {
    throw std::invalid_argument("obstacles are not separated at " +
                                at_node(check.step, check.node) + ": U - L = " +
                                format_real(check.min_margin));
  }
  for (std::size_t i = 0; i < game.xi.size(); ++i) {
    if (game.lower(n, i) > game.xi[i] || game.xi[i] > game.upper(n, i)) {
      throw std::invalid_argument("terminal payoff " + format_real(game.xi[i]) +
                                  " lies outside [" + format_real(game.lower(n, i)) + ", " +
                                  format_real(game.upper(n, i)) + "] at " + at_node(n, i));
    }
  }
  return check;
}

Solution solve_drbsde(const Lattice& lattice, const DynkinGame& game, Scheme scheme) {
  validate_game(lattice, game);
  Solution s = detail::backward_solve(
      lattice, game.xi, game.g, scheme, SolutionKind::doubly_reflected,
      [&](const Node& x, double a) {
        const double l = game.lower.at(x);
        const double u = game.upper.at(x);
        if (a < l) return detail::Projected{l, l - a, 0.0};
        if (a > u) return detail::Projected{u, 0.0, a - u};
        return detail::Projected{a, 0.0, 0.0};
      });
  s.lower = game.lower;
  s.upper = game.upper;
  return s;
}

const char* to_string(PenaltyDirection d) {
  return d == PenaltyDirection::increasing ? "increasing" : "decreasing";
}

PenaltyDirection penalty_direction_from_string(const std::string& name) {
  if (name == "increasing") return PenaltyDirection::increasing;
  if (name == "decreasing") return PenaltyDirection::decreasing;
  throw std::invalid_argument("unknown penalty direction '" + name +
                              "' (expected increasing or decreasing)");
}

std::vector<double> default_penalty_schedule() {
  std::vector<double> out;
  for (int e = 0; e <= 10; ++e) out.push_back(std::ldexp(1.0, e));
  return out;
}

PenalizationRun double_penalization(const Lattice& lattice, const DynkinGame& game,
                                    const std::vector<double>& schedule,
                                    PenaltyDirection direction, Scheme scheme) {
  validate_schedule(schedule);
  const Solution direct = solve_drbsde(lattice, game, scheme);
  const bool up = direction == PenaltyDirection::increasing;
  const double sign = up ? 1.0 : -1.0;
  const double dt = lattice.dt();

  double overshoot = 0.0;
  for (double v : (up ? direct.dk : direct.dj).values()) overshoot = std::max(overshoot, v);
  const double growth = step_growth_factor(game.g, lattice, scheme);
  const double scale = 1.0 + direct.y.sup_norm();
  const double slack = monotonicity_slack(scale);

  PenalizationRun run;
  PenalizationReport& rep = run.report;
  rep.side = up ? ObstacleSide::lower : ObstacleSide::upper;
  rep.schedule = schedule;
  rep.tolerance = 1e-6 * scale;
  for (double n : schedule) {
    Solution level = detail::backward_solve(
        lattice, game.xi, game.g, scheme, SolutionKind::doubly_reflected,
        [&](const Node& x, double a) {
          const double l = game.lower.at(x);
          const double u = game.upper.at(x);
          if (up) {
            const double p = penalized_value(a, l, dt, n, ObstacleSide::lower);
            const double y = std::min(u, p);
            return detail::Projected{y, p - a, p - y};
          }
          const double p = penalized_value(a, u, dt, n, ObstacleSide::upper);
          const double y = std::max(l, p);
          return detail::Projected{y, y - p, a - p};
        });
    level.lower = game.lower;
    level.upper = game.upper;

    const auto cur = level.y.values();
    const auto ref = direct.y.values();
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

PastingResult pasting_construct(const Lattice& lattice, const DynkinGame& game, Scheme scheme,
                                std::optional<double> eps_hit) {
  if (!lattice.is_full_tree()) {
    throw std::invalid_argument("pasting needs a full-tree lattice");
  }
  validate_game(lattice, game);
  const int n = lattice.steps();
  const std::size_t count = lattice.node_count();
  const auto& lo = game.lower;
  const auto& hi = game.upper;

  // a: value while reflecting at L (segment not yet at U), b: while reflecting
  // at U. Past a contact the segment hands over to the other side, so a
  // child's continuation reads the other array there.
  AdaptedProcess a(lattice), b(lattice), ca(lattice), cb(lattice), za(lattice), zb(lattice);
  for (std::size_t i = 0; i < game.xi.size(); ++i) a(n, i) = b(n, i) = game.xi[i];
  BackwardStep step(lattice, game.g, scheme);

  double eps = 0.0;
  auto hands_to_upper = [&](int k, std::size_t i) { return k < n && a(k, i) >= hi(k, i) - eps; };
  auto hands_to_lower = [&](int k, std::size_t i) { return k < n && b(k, i) <= lo(k, i) + eps; };
  auto cont_a = [&](int k, std::size_t i) { return hands_to_upper(k, i) ? b(k, i) : a(k, i); };
  auto cont_b = [&](int k, std::size_t i) { return hands_to_lower(k, i) ? a(k, i) : b(k, i); };

  // Contacts depend on eps, and eps on the solution scale; a first pass with
  // exact contacts fixes the scale.
  for (int pass = 0; pass < 2; ++pass) {
    for (int k = n - 1; k >= 0; --k) {
      for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
        const Node x = lattice.node(k, i);
        const std::size_t u = lattice.up_child(k, i);
        const std::size_t d = lattice.down_child(k, i);
        const StepValue va = step(x, cont_a(k + 1, u), cont_a(k + 1, d));
        const StepValue vb = step(x, cont_b(k + 1, u), cont_b(k + 1, d));
        ca(k, i) = va.y;
        cb(k, i) = vb.y;
        za(k, i) = va.z;
        zb(k, i) = vb.z;
        a(k, i) = std::max(lo(k, i), va.y);
        b(k, i) = std::min(hi(k, i), vb.y);
      }
    }
    if (pass == 0) {
      eps = eps_hit.value_or(1e-9 * (1.0 + std::max(a.sup_norm(), b.sup_norm())));
      if (!(eps >= 0.0)) throw std::invalid_argument("hitting tolerance must be nonnegative");
      if (eps == 0.0) break;
    }
  }

  // Forward pass: segment index per node, odd = reflecting at L.
  std::vector<int> segment(count, 0);
  segment[0] = 1 + (hands_to_upper(0, 0) ? 1 : 0);
  for (int k = 1; k <= n; ++k) {
    for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
      const std::size_t p = lattice.parent(k, i);
      const int s = segment[lattice.offset(k - 1) + p];
      const bool lower_side = s % 2 == 1;
      const bool switches = lower_side ? hands_to_upper(k, i) : hands_to_lower(k, i);
      segment[lattice.offset(k) + i] = s + (switches ? 1 : 0);
    }
  }

  PastingResult out{Solution(SolutionKind::doubly_reflected, lattice), {}};
  Solution& sol = out.solution;
  sol.lower = lo;
  sol.upper = hi;
  for (int k = 0; k <= n; ++k) {
    for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
      const bool lower_side = segment[lattice.offset(k) + i] % 2 == 1;
      if (lower_side) {
        sol.y(k, i) = a(k, i);
        if (k < n) {
          sol.z(k, i) = za(k, i);
          sol.dk(k, i) = a(k, i) - ca(k, i);
        }
      } else {
        sol.y(k, i) = b(k, i);
        if (k < n) {
          sol.z(k, i) = zb(k, i);
          sol.dj(k, i) = cb(k, i) - b(k, i);
        }
      }
    }
  }
  sol.meta = step.metadata();

  PastingLedger& ledger = out.ledger;
  const std::size_t leaves = lattice.nodes_at(n);
  ledger.depth.resize(leaves);
  for (std::size_t i = 0; i < leaves; ++i) {
    ledger.depth[i] = segment[lattice.offset(n) + i];
    ledger.max_depth = std::max(ledger.max_depth, ledger.depth[i]);
  }
  if (ledger.max_depth > n + 1) {
    throw std::runtime_error("pasting did not reach the horizon within " + std::to_string(n + 1) +
                             " segments");
  }
  for (int j = 1; j <= ledger.max_depth; ++j) {
    PastingSegment seg{j, j % 2 == 1 ? ObstacleSide::lower : ObstacleSide::upper,
                       StoppingRule(lattice), StoppingRule(lattice), 0};
    for (int k = 0; k <= n; ++k) {
      for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
        const int s = segment[lattice.offset(k) + i];
        const int before = k == 0 ? 1 : segment[lattice.offset(k - 1) + lattice.parent(k, i)];
        if (s == j) ++seg.node_count;
        // A segment starts where the index first reaches j and ends where it
        // first passes j; the root counts as entered from segment 1.
        if (s >= j && before < j) seg.start.set(k, i, true);
        if (j == 1 && k == 0) seg.start.set(k, i, true);
        if (s > j && before <= j) seg.end.set(k, i, true);
      }
    }
    seg.start = seg.start.canonical();
    seg.end = seg.end.canonical();
    ledger.segments.push_back(std::move(seg));
  }
  return out;
}

void write_pasting_csv(std::ostream& out, const PastingLedger& ledger) {
  out << "segment,side,start_hash,end_hash,node_count\n";
  for (const auto& s : ledger.segments) {
    out << s.index << ',' << to_string(s.side) << ',' << hex64(s.start.hash()) << ','
        << hex64(s.end.hash()) << ',' << s.node_count << '\n';
  }
}

CrossValidationReport cross_validate(const Lattice& lattice, const DynkinGame& game,
                                     const std::vector<double>& schedule, Scheme scheme,
                                     double pasting_tolerance, int jobs) {
  validate_game(lattice, game);
  validate_schedule(schedule);

  std::optional<Solution> direct;
  std::optional<PastingResult> pasted;
  std::optional<PenalizationRun> inc, dec;
  std::vector<std::function<void()>> routes{
      [&] { direct = solve_drbsde(lattice, game, scheme); },
      [&] {
        if (lattice.is_full_tree()) pasted = pasting_construct(lattice, game, scheme);
      },
      [&] { inc = double_penalization(lattice, game, schedule, PenaltyDirection::increasing, scheme); },
      [&] { dec = double_penalization(lattice, game, schedule, PenaltyDirection::decreasing, scheme); },
  };
  if (jobs > 1) {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(routes.size());
    for (std::size_t r = 0; r < routes.size(); ++r) {
      pool.emplace_back([&, r] {
        try {
          routes[r]();
        } catch (...) {
          errors[r] = std::current_exception();
        }
      });
      if (static_cast<int>(pool.size()) >= jobs) {
        for (auto& t : pool) t.join();
        pool.clear();
      }
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (auto& r : routes) r();
  }

  CrossValidationReport rep;
  const Solution& inc_cap = inc->levels.back();
  const Solution& dec_cap = dec->levels.back();
  rep.penalty_cap = schedule.back();
  rep.y0_direct = direct->y(0, 0);
  rep.y0_increasing = inc_cap.y(0, 0);
  rep.y0_decreasing = dec_cap.y(0, 0);
  rep.direct_vs_increasing = max_abs_difference(direct->y, inc_cap.y);
  rep.direct_vs_decreasing = max_abs_difference(direct->y, dec_cap.y);
  rep.max_pairwise_gap = std::max({rep.direct_vs_increasing, rep.direct_vs_decreasing,
                                   max_abs_difference(inc_cap.y, dec_cap.y)});
  if (pasted) {
    rep.y0_pasting = pasted->solution.y(0, 0);
    rep.direct_vs_pasting = max_abs_difference(direct->y, pasted->solution.y);
    rep.pasting_flat_off = flat_off_residual(pasted->solution);
    for (const Solution* s : {&inc_cap, &dec_cap}) {
      rep.max_pairwise_gap =
          std::max(rep.max_pairwise_gap, max_abs_difference(pasted->solution.y, s->y));
    }
    rep.max_pairwise_gap = std::max(rep.max_pairwise_gap, *rep.direct_vs_pasting);
  }
  for (std::size_t l = 0; l < schedule.size(); ++l) {
    const auto iy = inc->levels[l].y.values();
    const auto dy = dec->levels[l].y.values();
    for (std::size_t id = 0; id < iy.size(); ++id) {
      rep.squeeze_excess = std::max(rep.squeeze_excess, iy[id] - dy[id]);
    }
  }
  rep.increasing_envelope = inc->report.envelope.back();
  rep.decreasing_envelope = dec->report.envelope.back();
  rep.flat_off = flat_off_residual(*direct);
  for (const auto* r : {&inc->report, &dec->report}) {
    for (auto v : r->violations) rep.monotonicity_violations += v;
    for (auto v : r->squeeze_violations) rep.squeeze_violations += v;
  }

  const double slack = monotonicity_slack(1.0 + direct->y.sup_norm());
  rep.pass = rep.flat_off.lower == 0.0 && rep.flat_off.upper == 0.0 &&
             rep.monotonicity_violations == 0 && rep.squeeze_violations == 0 &&
             rep.squeeze_excess <= slack &&
             rep.direct_vs_increasing <= rep.increasing_envelope + slack &&
             rep.direct_vs_decreasing <= rep.decreasing_envelope + slack &&
             (!rep.direct_vs_pasting || *rep.direct_vs_pasting <= pasting_tolerance);
  return rep;
}

std::string cross_validation_json(const CrossValidationReport& r) {
  nlohmann::ordered_json j;
  j["y0_direct"] = r.y0_direct;
  j["y0_pasting"] = r.y0_pasting ? nlohmann::ordered_json(*r.y0_pasting) : nullptr;
  j["y0_increasing"] = r.y0_increasing;
  j["y0_decreasing"] = r.y0_decreasing;
  j["penalty_cap"] = r.penalty_cap;
  j["direct_vs_pasting"] =
      r.direct_vs_pasting ? nlohmann::ordered_json(*r.direct_vs_pasting) : nullptr;
  j["direct_vs_increasing"] = r.direct_vs_increasing;
  j["direct_vs_decreasing"] = r.direct_vs_decreasing;
  j["squeeze_excess"] = r.squeeze_excess;
  j["max_pairwise_gap"] = r.max_pairwise_gap;
  j["increasing_envelope"] = r.increasing_envelope;
  j["decreasing_envelope"] = r.decreasing_envelope;
  j["flat_off"] = {{"lower", r.flat_off.lower}, {"upper", r.flat_off.upper}};
  if (r.pasting_flat_off) {
    j["pasting_flat_off"] = {{"lower", r.pasting_flat_off->lower},
                             {"upper", r.pasting_flat_off->upper}};
  }
  j["monotonicity_violations"] = r.monotonicity_violations;
  j["squeeze_violations"] = r.squeeze_violations;
  j["pass"] = r.pass;
  return j.dump(2);
}

}  // namespace drbsde
