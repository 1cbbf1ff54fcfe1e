#include "drbsde/generator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>

#include "drbsde/io.hpp"

namespace drbsde {

Generator::Generator()
    : Generator([](const Node&, double, double) { return 0.0; }, GeneratorConstants{},
                [](const Node&) { return 0.0; },
                GeneratorTraits{.y_free = true, .zero_at_zero_z = true, .zero_at_origin = true},
                "zero") {}

Generator::Generator(Driver driver, GeneratorConstants constants, Bound h, GeneratorTraits traits,
                     std::string name)
    : driver_(std::move(driver)),
      constants_(constants),
      h_(h ? std::move(h) : Bound([](const Node&) { return 0.0; })),
      traits_(traits),
      name_(std::move(name)) {
  if (!driver_) throw std::invalid_argument("generator needs a driver");
  if (!(constants_.kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  if (!(constants_.alpha > 0.0 && constants_.alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
}

Generator zero_generator() { return Generator(); }

Generator constant_generator(double c) {
  const double h = std::abs(c);
  return Generator([c](const Node&, double, double) { return c; }, GeneratorConstants{},
                   [h](const Node&) { return h; },
                   GeneratorTraits{.y_free = true, .zero_at_zero_z = c == 0.0,
                                   .zero_at_origin = c == 0.0},
                   "constant:" + format_real(c));
}

Generator linear_generator(double a, double b) {
  GeneratorConstants c;
  c.kappa = std::max({std::abs(a), std::abs(b), 1e-12});
  c.lambda = a;
  return Generator([a, b](const Node&, double y, double z) { return a * y + b * z; }, c,
                   [](const Node&) { return 0.0; },
                   GeneratorTraits{.y_free = a == 0.0, .zero_at_zero_z = a == 0.0,
                                   .zero_at_origin = true},
                   "linear:" + format_real(a) + "," + format_real(b));
}

Generator sine_generator(double a, double b) {
  GeneratorConstants c;
  c.kappa = std::max({std::abs(a), std::abs(b), 1e-12});
  c.lambda = a;
  const double h = std::abs(b);
  return Generator([a, b](const Node&, double y, double z) { return a * y + b * std::sin(z); }, c,
                   [h](const Node&) { return h; },
                   GeneratorTraits{.y_free = a == 0.0, .zero_at_zero_z = a == 0.0,
                                   .zero_at_origin = true},
                   "sine:" + format_real(a) + "," + format_real(b));
}

Generator abs_z_generator(double k) {
  GeneratorConstants c;
  c.kappa = std::max(std::abs(k), 1e-12);
  c.lambda = 0.0;
  return Generator([k](const Node&, double, double z) { return k * std::abs(z); }, c,
                   [](const Node&) { return 0.0; },
                   GeneratorTraits{.y_free = true, .zero_at_zero_z = true, .zero_at_origin = true},
                   "abs-z:" + format_real(k));
}

namespace {

void check_penalty(double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("penalty level must be a finite nonnegative number, got " +
                                format_real(n));
  }
}

}  // namespace

Generator penalize_lower(const Generator& g, const AdaptedProcess& lower, double n) {
  check_penalty(n);
  if (n == 0.0) return g;
  auto obstacle = std::make_shared<const AdaptedProcess>(lower);
  GeneratorConstants c = g.constants();
  c.kappa += n;
  return Generator(
      [g, obstacle, n](const Node& x, double y, double z) {
        return g(x, y, z) + n * std::max(obstacle->at(x) - y, 0.0);
      },
      c, [g, obstacle, n](const Node& x) { return g.h(x) + n * std::max(obstacle->at(x), 0.0); },
      GeneratorTraits{}, g.name() + "+penalty-lower:" + format_real(n));
}

Generator penalize_upper(const Generator& g, const AdaptedProcess& upper, double n) {
  check_penalty(n);
  if (n == 0.0) return g;
  auto obstacle = std::make_shared<const AdaptedProcess>(upper);
  GeneratorConstants c = g.constants();
  c.kappa += n;
  return Generator(
      [g, obstacle, n](const Node& x, double y, double z) {
        return g(x, y, z) - n * std::max(y - obstacle->at(x), 0.0);
      },
      c, [g, obstacle, n](const Node& x) { return g.h(x) + n * std::max(-obstacle->at(x), 0.0); },
      GeneratorTraits{}, g.name() + "-penalty-upper:" + format_real(n));
}

Generator negate_reflect(const Generator& g) {
  return Generator([g](const Node& x, double y, double z) { return -g(x, -y, -z); },
                   g.constants(), [g](const Node& x) { return g.h(x); }, g.traits(),
                   "neg(" + g.name() + ")");
}

Generator stop_generator(const Generator& g, const StoppingRule& tau) {
  const Lattice& lat = tau.lattice();
  const auto phase = stop_phase(tau);
  auto active = std::make_shared<std::vector<std::uint8_t>>(lat.node_count(), 0);
  for (std::size_t id = 0; id < phase.size(); ++id) {
    (*active)[id] = phase[id] == StopPhase::before ? 1 : 0;
  }
  GeneratorConstants c = g.constants();
  c.lambda = std::max(c.lambda, 0.0);
  const int steps = lat.steps();
  return Generator(
      [g, active, lat, steps](const Node& x, double y, double z) {
        if (x.step < 0 || x.step > steps) {
          throw std::out_of_range("stopped generator evaluated off its lattice");
        }
        return (*active)[lat.offset(x.step) + x.index] ? g(x, y, z) : 0.0;
      },
      c, [g](const Node& x) { return g.h(x); }, g.traits(), g.name() + "|stopped");
}

bool HypothesisReport::all_pass() const {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const HypothesisVerdict& v) { return v.pass; });
}

namespace {

// Relative slack so that equality cases such as y-monotone for g = -y survive
// rounding.
constexpr double kHypothesisSlack = 1e-12;

void record(HypothesisVerdict& v, double lhs, double rhs, const HypothesisCounterexample& at) {
  ++v.samples;
  const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
  v.worst_ratio = std::max(v.worst_ratio, ratio);
  if (lhs > rhs + kHypothesisSlack * (1.0 + std::abs(rhs))) {
    if (v.pass) v.counterexample = at;
    v.pass = false;
  }
}

}  // namespace

HypothesisReport check_hypotheses(const Generator& g, const HypothesisCheckOptions& options) {
  if (options.sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
  HypothesisReport report;
  const char* names[] = {"z-lipschitz", "y-monotone", "y-continuous", "linear-growth",
                         "z-sublinear"};
  for (std::size_t i = 0; i < 5; ++i) report.verdicts[i].name = names[i];

  std::mt19937_64 rng(options.seed);
  const SamplingBox& b = options.box;
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double kappa = g.kappa();
  const double lambda = g.lambda();
  const double alpha = g.alpha();

  for (std::size_t s = 0; s < options.sample_count; ++s) {
    Node x;
    if (options.lattice) {
      const Lattice& lat = *options.lattice;
      const int k = std::uniform_int_distribution<int>(0, lat.steps() - 1)(rng);
      const auto i = std::uniform_int_distribution<std::size_t>(0, lat.nodes_at(k) - 1)(rng);
      x = lat.node(k, i);
    } else {
      x = Node{-1, 0, uniform(b.t_min, b.t_max), uniform(b.state_min, b.state_max)};
    }
    const double y = uniform(b.y_min, b.y_max);
    const double y2 = uniform(b.y_min, b.y_max);
    const double z = uniform(b.z_min, b.z_max);
    const double z2 = uniform(b.z_min, b.z_max);
    const double h = g.h(x);
    const HypothesisCounterexample at{x.t, x.state, y, y2, z, z2};

    record(report.verdicts[0], std::abs(g(x, y, z) - g(x, y, z2)), kappa * std::abs(z - z2), at);

    const double sgn = y > y2 ? 1.0 : (y < y2 ? -1.0 : 0.0);
    record(report.verdicts[1], sgn * (g(x, y, z) - g(x, y2, z)), lambda * std::abs(y - y2), at);

    const double delta = options.continuity_delta;
    record(report.verdicts[2], std::abs(g(x, y + delta, z) - g(x, y, z)),
           options.continuity_bound * delta, at);

    const double g0 = g(x, y, 0.0);
    record(report.verdicts[3], std::abs(g0), h + kappa * std::abs(y), at);

    record(report.verdicts[4], std::abs(g(x, y, z) - g0),
           kappa * std::pow(h + std::abs(y) + std::abs(z), alpha), at);
  }
  return report;
}

}  // namespace drbsde
