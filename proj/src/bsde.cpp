#include "drbsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "drbsde/io.hpp"

namespace drbsde {

const char* to_string(Scheme scheme) {
  return scheme == Scheme::explicit_euler ? "explicit" : "implicit";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "explicit") return Scheme::explicit_euler;
  if (name == "implicit") return Scheme::implicit_euler;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected explicit or implicit)");
}

const char* to_string(SolutionKind kind) {
  switch (kind) {
    case SolutionKind::plain: return "plain";
    case SolutionKind::reflected_lower: return "reflected-lower";
    case SolutionKind::reflected_upper: return "reflected-upper";
    case SolutionKind::doubly_reflected: return "doubly-reflected";
  }
  return "?";
}

Solution::Solution(SolutionKind k, const Lattice& lattice)
    : kind(k), y(lattice), z(lattice), dk(lattice), dj(lattice) {}

double monotone_step_guard(const Generator& g, double dt) {
  return std::sqrt(dt) * g.kappa() + dt * g.lambda_plus();
}

BackwardStep::BackwardStep(const Lattice& lattice, const Generator& g, Scheme scheme)
    : dt_(lattice.dt()),
      sqrt_dt_(lattice.sqrt_dt()),
      damping_(1.0 / (1.0 + lattice.dt() * g.lambda_plus())),
      g_(g) {
  meta_.scheme = scheme;
  meta_.dt = dt_;
  meta_.guard_value = monotone_step_guard(g, dt_);
  meta_.guard_ok = meta_.guard_value <= 1.0;
  if (!meta_.guard_ok) {
    meta_.warnings.push_back("monotone-step guard sqrt(dt)*kappa + dt*lambda+ = " +
                             format_real(meta_.guard_value) + " exceeds 1");
  }
  if (scheme == Scheme::implicit_euler && !(dt_ * g.lambda_plus() < 1.0)) {
    throw std::invalid_argument("implicit scheme needs dt * lambda+ < 1, got " +
                                format_real(dt_ * g.lambda_plus()));
  }
}

StepValue BackwardStep::operator()(const Node& node, double up, double down) {
  const double mean = 0.5 * (up + down);
  const double z = (up - down) / (2.0 * sqrt_dt_);
  if (meta_.scheme == Scheme::explicit_euler) {
    return {mean + dt_ * g_(node, mean, z), z};
  }
  return {solve_implicit(node, mean, z), z};
}

double BackwardStep::solve_implicit(const Node& node, double mean, double z) {
  ++meta_.implicit_solves;
  double y = mean;
  for (int it = 1; it <= kImplicitMaxIterations; ++it) {
    const double target = mean + dt_ * g_(node, y, z);
    const double next = (1.0 - damping_) * y + damping_ * target;
    const double change = std::abs(next - y);
    y = next;
    if (change <= kImplicitTolerance * (1.0 + std::abs(y))) {
      meta_.fixed_point_iterations += static_cast<std::size_t>(it);
      meta_.max_fixed_point_iterations = std::max(meta_.max_fixed_point_iterations, it);
      return y;
    }
  }
  meta_.fixed_point_iterations += kImplicitMaxIterations;
  meta_.max_fixed_point_iterations = kImplicitMaxIterations;

  // y - dt g(y, z) - mean is increasing in y when dt lambda+ < 1, so bisection
  // on a bracket always converges.
  auto residual = [&](double v) { return v - dt_ * g_(node, v, z) - mean; };
  double width = 1.0 + std::abs(mean);
  double lo = mean - width;
  double hi = mean + width;
  int expansions = 0;
  while (!(residual(lo) <= 0.0 && residual(hi) >= 0.0)) {
    if (++expansions > 200 || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw std::runtime_error("implicit step did not converge at step " +
                               std::to_string(node.step) + ", node " + std::to_string(node.index));
    }
    width *= 2.0;
    lo = mean - width;
    hi = mean + width;
  }
  for (int it = 0; it < 400 && hi - lo > kImplicitTolerance * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) <= 0.0 ? lo : hi) = mid;
  }
  ++meta_.bisection_fallbacks;
  return 0.5 * (lo + hi);
}

Solution solve_bsde(const Lattice& lattice, const TerminalPayoff& xi, const Generator& g,
                    Scheme scheme) {
  if (!(xi.lattice() == lattice)) {
    throw std::invalid_argument("terminal payoff lives on a different lattice");
  }
  Solution s(SolutionKind::plain, lattice);
  BackwardStep step(lattice, g, scheme);
  const int n = lattice.steps();
  std::copy(xi.values().begin(), xi.values().end(), s.y.step(n).begin());
  for (int k = n - 1; k >= 0; --k) {
    const auto next = s.y.step(k + 1);
    auto yk = s.y.step(k);
    auto zk = s.z.step(k);
    for (std::size_t i = 0; i < yk.size(); ++i) {
      const auto v = step(lattice.node(k, i), next[lattice.up_child(k, i)],
                          next[lattice.down_child(k, i)]);
      yk[i] = v.y;
      zk[i] = v.z;
    }
  }
  s.meta = step.metadata();
  return s;
}

StoppedEvaluator::StoppedEvaluator(const Lattice& lattice, const Generator& g, Scheme scheme)
    : lattice_(lattice), step_(lattice, g, scheme) {
  nodes_.reserve(lattice.node_count());
  for (int k = 0; k <= lattice.steps(); ++k) {
    for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) nodes_.push_back(lattice.node(k, i));
  }
}

void StoppedEvaluator::evaluate(std::span<const std::uint8_t> stop, std::span<double> values) {
  if (stop.size() != nodes_.size() || values.size() != nodes_.size()) {
    throw std::invalid_argument("stopped evaluation needs one entry per lattice node");
  }
  const Lattice& lat = lattice_;
  for (int k = lat.steps() - 1; k >= 0; --k) {
    const std::size_t off = lat.offset(k);
    const std::size_t next = lat.offset(k + 1);
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const std::size_t id = off + i;
      if (stop[id]) continue;
      values[id] = step_(nodes_[id], values[next + lat.up_child(k, i)],
                         values[next + lat.down_child(k, i)])
                       .y;
    }
  }
}

AdaptedProcess g_evaluate(const Lattice& lattice, const StoppingRule& nu, const StoppingRule& tau,
                          const AdaptedProcess& payoff, const Generator& g, Scheme scheme) {
  if (!(nu.lattice() == lattice) || !(tau.lattice() == lattice) || !(payoff.lattice() == lattice)) {
    throw std::invalid_argument("g-evaluation inputs live on different lattices");
  }
  if (!precedes(nu, tau)) {
    throw std::invalid_argument("g-evaluation needs nu <= tau on every path");
  }
  AdaptedProcess v = payoff;
  StoppedEvaluator eval(lattice, g, scheme);
  eval.evaluate(tau.flags(), v.values());
  return v;
}

std::vector<double> values_at(const AdaptedProcess& x, const StoppingRule& nu) {
  const auto live = nu.reachable_unstopped();
  std::vector<double> out;
  const Lattice& lat = x.lattice();
  for (int k = 0; k <= lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      if (live[lat.offset(k) + i] && nu.stops(k, i)) out.push_back(x(k, i));
    }
  }
  return out;
}

MartingaleRepresentation martingale_represent(const Lattice& lattice, const TerminalPayoff& xi) {
  MartingaleRepresentation rep{0.0, AdaptedProcess(lattice), AdaptedProcess(lattice)};
  const int n = lattice.steps();
  std::copy(xi.values().begin(), xi.values().end(), rep.conditional.step(n).begin());
  for (int k = n - 1; k >= 0; --k) {
    const auto next = rep.conditional.step(k + 1);
    const auto mean = conditional_expectation(lattice, k, next);
    const auto z = martingale_increment(lattice, k, next);
    std::copy(mean.begin(), mean.end(), rep.conditional.step(k).begin());
    std::copy(z.begin(), z.end(), rep.z.step(k).begin());
  }
  rep.mean = rep.conditional(0, 0);
  return rep;
}

std::vector<AxiomCase> make_axiom_cases(const Lattice& lattice, std::size_t count,
                                        std::uint64_t seed) {
  if (!lattice.is_full_tree()) {
    throw std::invalid_argument("axiom cases need a full-tree lattice");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution stop_tau(0.25), stop_more(0.2), coin(0.5);
  std::normal_distribution<double> normal;

  auto random_process = [&] {
    AdaptedProcess x(lattice);
    for (double& v : x.values()) v = normal(rng);
    return x;
  };
  auto widen = [&](const StoppingRule& base) {
    StoppingRule r = base;
    for (int k = 0; k < lattice.steps(); ++k) {
      for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
        if (stop_more(rng)) r.set(k, i, true);
      }
    }
    return r.canonical();
  };

  std::vector<AxiomCase> cases;
  cases.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    StoppingRule tau(lattice);
    for (int k = 0; k < lattice.steps(); ++k) {
      for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) tau.set(k, i, stop_tau(rng));
    }
    tau = tau.canonical();
    StoppingRule gamma = widen(tau);
    StoppingRule nu = widen(gamma);
    AdaptedProcess xi = random_process();
    AdaptedProcess eta = random_process();
    std::vector<std::uint8_t> event(lattice.node_count());
    for (auto& e : event) e = coin(rng) ? 1 : 0;
    AdaptedProcess nu_value = random_process();
    cases.push_back(AxiomCase{std::move(nu), std::move(gamma), std::move(tau), std::move(xi),
                              std::move(eta), std::move(event), std::move(nu_value)});
  }
  return cases;
}

bool AxiomReport::all_pass() const {
  return std::all_of(axioms.begin(), axioms.end(), [](const AxiomResult& a) { return a.pass; });
}

namespace {

void note(AxiomResult& r, double violation, double tolerance) {
  ++r.checked;
  r.max_violation = std::max(r.max_violation, violation);
  if (violation > tolerance) r.pass = false;
}

}  // namespace

AxiomReport verify_evaluation_axioms(const Lattice& lattice, const Generator& g,
                                     const std::vector<AxiomCase>& cases, Scheme scheme,
                                     double tolerance) {
  if (!lattice.is_full_tree()) {
    throw std::invalid_argument("axiom checks need a full-tree lattice");
  }
  AxiomReport report;
  report.axioms[0].name = "monotonicity";
  report.axioms[1].name = "time-consistency";
  report.axioms[2].name = "constant-preserving";
  report.axioms[3].name = "zero-one-law";
  report.axioms[4].name = "translation-invariance";

  StoppedEvaluator eval(lattice, g, scheme);
  const std::size_t count = lattice.node_count();
  auto evaluate = [&](const StoppingRule& rule, const AdaptedProcess& payoff) {
    AdaptedProcess v = payoff;
    eval.evaluate(rule.flags(), v.values());
    return v;
  };
  const GeneratorTraits& traits = g.traits();

  for (const AxiomCase& c : cases) {
    if (!precedes(c.nu, c.gamma) || !precedes(c.gamma, c.tau)) {
      throw std::invalid_argument("axiom case violates nu <= gamma <= tau");
    }
    const auto nu_live = c.nu.reachable_unstopped();
    std::vector<std::size_t> nu_nodes;
    for (std::size_t id = 0; id < count; ++id) {
      if (nu_live[id] && c.nu.flags()[id]) nu_nodes.push_back(id);
    }
    const auto anc = stopping_ancestor(c.nu);
    // Transport an F_nu quantity given at nu-nodes onto every later node.
    auto transported = [&](auto&& at_nu) {
      AdaptedProcess x(lattice);
      for (std::size_t id = 0; id < count; ++id) {
        if (anc[id] != std::numeric_limits<std::size_t>::max()) x.values()[id] = at_nu(anc[id]);
      }
      return x;
    };
    auto max_gap_on_nu = [&](const AdaptedProcess& a, const AdaptedProcess& b, auto&& weight) {
      double m = 0.0;
      for (std::size_t id : nu_nodes) {
        m = std::max(m, std::abs(weight(id) * (a.values()[id] - b.values()[id])));
      }
      return m;
    };
    auto one = [](std::size_t) { return 1.0; };

    const AdaptedProcess v_xi = evaluate(c.tau, c.xi);

    {  // monotonicity
      AdaptedProcess lo = c.xi, hi = c.xi;
      for (std::size_t id = 0; id < count; ++id) {
        lo.values()[id] = std::min(c.xi.values()[id], c.eta.values()[id]);
        hi.values()[id] = std::max(c.xi.values()[id], c.eta.values()[id]);
      }
      const AdaptedProcess v_lo = evaluate(c.tau, lo);
      const AdaptedProcess v_hi = evaluate(c.tau, hi);
      double worst = 0.0;
      for (std::size_t id : nu_nodes) {
        worst = std::max(worst, v_lo.values()[id] - v_hi.values()[id]);
      }
      note(report.axioms[0], worst, tolerance);
    }

    {  // time-consistency through gamma
      const AdaptedProcess composed = evaluate(c.gamma, v_xi);
      note(report.axioms[1], max_gap_on_nu(composed, v_xi, one), tolerance);
    }

    const AdaptedProcess nu_payoff =
        transported([&](std::size_t id) { return c.nu_value.values()[id]; });

    if (traits.zero_at_zero_z) {
      const AdaptedProcess v = evaluate(c.tau, nu_payoff);
      note(report.axioms[2], max_gap_on_nu(v, nu_payoff, one), tolerance);
    } else {
      ++report.axioms[2].skipped;
    }

    {  // zero-one law
      const AdaptedProcess indicator =
          transported([&](std::size_t id) { return c.event[id] ? 1.0 : 0.0; });
      AdaptedProcess masked = c.xi;
      for (std::size_t id = 0; id < count; ++id) masked.values()[id] *= indicator.values()[id];
      const AdaptedProcess v_masked = evaluate(c.tau, masked);
      auto in_event = [&](std::size_t id) { return c.event[id] ? 1.0 : 0.0; };
      double worst = max_gap_on_nu(v_masked, v_xi, in_event);
      if (traits.zero_at_origin) {
        AdaptedProcess scaled = v_xi;
        for (std::size_t id = 0; id < count; ++id) scaled.values()[id] *= indicator.values()[id];
        worst = std::max(worst, max_gap_on_nu(v_masked, scaled, one));
      }
      note(report.axioms[3], worst, tolerance);
    }

    if (traits.y_free) {
      AdaptedProcess shifted = c.xi;
      for (std::size_t id = 0; id < count; ++id) shifted.values()[id] += nu_payoff.values()[id];
      const AdaptedProcess v = evaluate(c.tau, shifted);
      double worst = 0.0;
      for (std::size_t id : nu_nodes) {
        worst = std::max(worst, std::abs(v.values()[id] -
                                         (v_xi.values()[id] + nu_payoff.values()[id])));
      }
      note(report.axioms[4], worst, tolerance);
    } else {
      ++report.axioms[4].skipped;
    }
  }
  return report;
}

void write_solution_csv(std::ostream& out, const Solution& s) {
  const Lattice& lat = s.lattice();
  out << "k,node_id,state,Y,Z,K,J\n";
  for (int k = 0; k <= lat.steps(); ++k) {
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      out << k << ',' << i << ',' << format_real(lat.state(k, i)) << ',' << format_real(s.y(k, i))
          << ',' << format_real(s.z(k, i)) << ',' << format_real(s.dk(k, i)) << ','
          << format_real(s.dj(k, i)) << '\n';
    }
  }
}

std::string metadata_json(const SolverMetadata& meta) {
  nlohmann::ordered_json j;
  j["scheme"] = to_string(meta.scheme);
  j["dt"] = meta.dt;
  j["guard_value"] = meta.guard_value;
  j["guard_ok"] = meta.guard_ok;
  j["implicit_solves"] = meta.implicit_solves;
  j["fixed_point_iterations"] = meta.fixed_point_iterations;
  j["max_fixed_point_iterations"] = meta.max_fixed_point_iterations;
  j["bisection_fallbacks"] = meta.bisection_fallbacks;
  j["warnings"] = meta.warnings;
  return j.dump(2);
}

}  // namespace drbsde
