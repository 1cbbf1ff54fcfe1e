#include "drbsde/lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "drbsde/io.hpp"

namespace drbsde {

const char* to_string(LatticeMode mode) {
  return mode == LatticeMode::recombining ? "recombining" : "full-tree";
}

LatticeMode lattice_mode_from_string(const std::string& name) {
  if (name == "recombining") return LatticeMode::recombining;
  if (name == "full-tree" || name == "full_tree" || name == "tree") return LatticeMode::full_tree;
  throw std::invalid_argument("unknown lattice mode '" + name + "'");
}

Lattice::Lattice(double horizon, int steps, LatticeMode mode)
    : horizon_(horizon),
      steps_(steps),
      dt_(horizon / steps),
      sqrt_dt_(std::sqrt(horizon / steps)),
      mode_(mode) {}

Lattice Lattice::build(double horizon, int steps, LatticeMode mode) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("lattice horizon must be positive, got " + format_real(horizon));
  }
  if (steps < 1) {
    throw std::invalid_argument("lattice needs at least one step, got " + std::to_string(steps));
  }
  if (mode == LatticeMode::full_tree && steps > kMaxFullTreeSteps) {
    throw std::length_error("full-tree lattice limited to " + std::to_string(kMaxFullTreeSteps) +
                            " steps, got " + std::to_string(steps));
  }
  return Lattice(horizon, steps, mode);
}

double Lattice::time(int k) const {
  return k == steps_ ? horizon_ : dt_ * k;
}

std::size_t Lattice::nodes_at(int k) const {
  if (mode_ == LatticeMode::recombining) return static_cast<std::size_t>(k) + 1;
  return std::size_t{1} << k;
}

std::size_t Lattice::offset(int k) const {
  const auto kk = static_cast<std::size_t>(k);
  if (mode_ == LatticeMode::recombining) return kk * (kk + 1) / 2;
  return (std::size_t{1} << k) - 1;
}

int Lattice::up_count(int /*k*/, std::size_t i) const {
  if (mode_ == LatticeMode::recombining) return static_cast<int>(i);
  return std::popcount(i);
}

double Lattice::state(int k, std::size_t i) const {
  return (2.0 * up_count(k, i) - k) * sqrt_dt_;
}

Node Lattice::node(int k, std::size_t i) const {
  return Node{k, i, time(k), state(k, i)};
}

std::size_t Lattice::down_child(int /*k*/, std::size_t i) const {
  return mode_ == LatticeMode::recombining ? i : 2 * i;
}

std::size_t Lattice::up_child(int /*k*/, std::size_t i) const {
  return mode_ == LatticeMode::recombining ? i + 1 : 2 * i + 1;
}

std::size_t Lattice::parent(int /*k*/, std::size_t i) const { return i >> 1; }

double Lattice::terminal_probability(std::size_t i) const {
  if (mode_ == LatticeMode::full_tree) return std::ldexp(1.0, -steps_);
  // C(N, i) / 2^N through log-gamma keeps N up to a few thousand finite.
  const double n = steps_;
  const double j = static_cast<double>(i);
  const double log_binom = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
  return std::exp(log_binom - n * std::log(2.0));
}

AdaptedProcess::AdaptedProcess(const Lattice& lattice, double fill)
    : lattice_(lattice), values_(lattice.node_count(), fill) {}

AdaptedProcess AdaptedProcess::from_function(
    const Lattice& lattice, const std::function<double(double t, double state)>& f) {
  return from_node_function(lattice, [&](const Node& n) { return f(n.t, n.state); });
}

AdaptedProcess AdaptedProcess::from_node_function(const Lattice& lattice,
                                                  const std::function<double(const Node&)>& f) {
  AdaptedProcess x(lattice);
  for (int k = 0; k <= lattice.steps(); ++k) {
    auto values = x.step(k);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = f(lattice.node(k, i));
  }
  return x;
}

std::span<const double> AdaptedProcess::step(int k) const {
  return std::span<const double>(values_).subspan(lattice_.offset(k), lattice_.nodes_at(k));
}

std::span<double> AdaptedProcess::step(int k) {
  return std::span<double>(values_).subspan(lattice_.offset(k), lattice_.nodes_at(k));
}

double AdaptedProcess::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

AdaptedProcess operator-(const AdaptedProcess& x) {
  AdaptedProcess y = x;
  for (double& v : y.values()) v = -v;
  return y;
}

double max_abs_difference(const AdaptedProcess& a, const AdaptedProcess& b) {
  if (!(a.lattice() == b.lattice())) {
    throw std::invalid_argument("processes live on different lattices");
  }
  double m = 0.0;
  const auto va = a.values();
  const auto vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) m = std::max(m, std::abs(va[i] - vb[i]));
  return m;
}

TerminalPayoff::TerminalPayoff(const Lattice& lattice, std::vector<double> values)
    : lattice_(lattice), values_(std::move(values)) {
  if (values_.size() != lattice_.nodes_at(lattice_.steps())) {
    throw std::invalid_argument("terminal payoff has " + std::to_string(values_.size()) +
                                " values, lattice has " +
                                std::to_string(lattice_.nodes_at(lattice_.steps())) +
                                " terminal nodes");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument("terminal payoff is not finite at terminal node " +
                                  std::to_string(i));
    }
  }
}

TerminalPayoff TerminalPayoff::from_function(const Lattice& lattice,
                                             const std::function<double(double state)>& f) {
  const int n = lattice.steps();
  std::vector<double> v(lattice.nodes_at(n));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(lattice.state(n, i));
  return TerminalPayoff(lattice, std::move(v));
}

TerminalPayoff TerminalPayoff::from_process(const AdaptedProcess& x) {
  const auto last = x.step(x.lattice().steps());
  return TerminalPayoff(x.lattice(), std::vector<double>(last.begin(), last.end()));
}

double TerminalPayoff::expectation() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += lattice_.terminal_probability(i) * values_[i];
  return s;
}

TerminalPayoff operator-(const TerminalPayoff& xi) {
  std::vector<double> v(xi.values().begin(), xi.values().end());
  for (double& x : v) x = -x;
  return TerminalPayoff(xi.lattice(), std::move(v));
}

namespace {

void check_step_input(const Lattice& lattice, int k, std::span<const double> next) {
  if (k < 0 || k >= lattice.steps()) {
    throw std::out_of_range("step " + std::to_string(k) + " outside [0, " +
                            std::to_string(lattice.steps() - 1) + "]");
  }
  if (next.size() != lattice.nodes_at(k + 1)) {
    throw std::invalid_argument("expected " + std::to_string(lattice.nodes_at(k + 1)) +
                                " values at step " + std::to_string(k + 1) + ", got " +
                                std::to_string(next.size()));
  }
}

}  // namespace

std::vector<double> conditional_expectation(const Lattice& lattice, int k,
                                            std::span<const double> next) {
  check_step_input(lattice, k, next);
  std::vector<double> out(lattice.nodes_at(k));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * (next[lattice.up_child(k, i)] + next[lattice.down_child(k, i)]);
  }
  return out;
}

std::vector<double> martingale_increment(const Lattice& lattice, int k,
                                         std::span<const double> next) {
  check_step_input(lattice, k, next);
  std::vector<double> out(lattice.nodes_at(k));
  const double denom = 2.0 * lattice.sqrt_dt();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (next[lattice.up_child(k, i)] - next[lattice.down_child(k, i)]) / denom;
  }
  return out;
}

void write_csv(std::ostream& out, const AdaptedProcess& x) {
  const Lattice& lat = x.lattice();
  out << "k,node_id,state,value\n";
  for (int k = 0; k <= lat.steps(); ++k) {
    const auto v = x.step(k);
    for (std::size_t i = 0; i < v.size(); ++i) {
      out << k << ',' << i << ',' << format_real(lat.state(k, i)) << ',' << format_real(v[i])
          << '\n';
    }
  }
}

void write_lattice_csv(std::ostream& out, const Lattice& lattice) {
  write_csv(out, AdaptedProcess::from_function(lattice, [](double t, double) { return t; }));
}

}  // namespace drbsde
