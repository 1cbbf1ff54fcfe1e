#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace drbsde {

enum class LatticeMode { recombining, full_tree };

const char* to_string(LatticeMode mode);
LatticeMode lattice_mode_from_string(const std::string& name);

/// Full-tree lattices store 2^(N+1)-1 nodes; beyond this the memory cost is
/// not worth it.
inline constexpr int kMaxFullTreeSteps = 24;

/// A lattice node as seen by drivers and obstacles. `index` is the position
/// within step `step`: the up-count j on a recombining lattice, the bit path
/// (first move in the most significant bit, 1 = up) on a full tree.
struct Node {
  int step = 0;
  std::size_t index = 0;
  double t = 0.0;
  double state = 0.0;
};

/// Symmetric random walk approximation of a one-dimensional Brownian motion:
/// each step moves by +sqrt(dt) or -sqrt(dt) with probability 1/2.
///
/// Nodes are computed on demand, so a Lattice is a small value type that can
/// be copied freely.
class Lattice {
 public:
  static Lattice build(double horizon, int steps, LatticeMode mode);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return dt_; }
  double sqrt_dt() const { return sqrt_dt_; }
  LatticeMode mode() const { return mode_; }
  bool is_full_tree() const { return mode_ == LatticeMode::full_tree; }

  double time(int k) const;
  std::size_t nodes_at(int k) const;
  /// Offset of step k in a flat per-node array.
  std::size_t offset(int k) const;
  std::size_t node_count() const { return offset(steps_ + 1); }

  int up_count(int k, std::size_t i) const;
  double state(int k, std::size_t i) const;
  Node node(int k, std::size_t i) const;

  std::size_t down_child(int k, std::size_t i) const;
  std::size_t up_child(int k, std::size_t i) const;
  /// Parent on the full tree; undefined on recombining lattices.
  std::size_t parent(int k, std::size_t i) const;

  /// Probability of reaching terminal node i from the root.
  double terminal_probability(std::size_t i) const;

  bool operator==(const Lattice& other) const = default;

 private:
  Lattice(double horizon, int steps, LatticeMode mode);

  double horizon_ = 1.0;
  int steps_ = 1;
  double dt_ = 1.0;
  double sqrt_dt_ = 1.0;
  LatticeMode mode_ = LatticeMode::recombining;
};

/// Real-valued process with one value per lattice node.
class AdaptedProcess {
 public:
  explicit AdaptedProcess(const Lattice& lattice, double fill = 0.0);

  static AdaptedProcess from_function(
      const Lattice& lattice, const std::function<double(double t, double state)>& f);
  static AdaptedProcess from_node_function(const Lattice& lattice,
                                           const std::function<double(const Node&)>& f);

  const Lattice& lattice() const { return lattice_; }

  std::span<const double> step(int k) const;
  std::span<double> step(int k);
  double operator()(int k, std::size_t i) const { return values_[lattice_.offset(k) + i]; }
  double& operator()(int k, std::size_t i) { return values_[lattice_.offset(k) + i]; }
  double at(const Node& n) const { return (*this)(n.step, n.index); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double sup_norm() const;

 private:
  Lattice lattice_;
  std::vector<double> values_;
};

AdaptedProcess operator-(const AdaptedProcess& x);
/// Largest node-wise |a - b|; the lattices must match.
double max_abs_difference(const AdaptedProcess& a, const AdaptedProcess& b);

/// Terminal datum xi, one value per node of the last step.
class TerminalPayoff {
 public:
  TerminalPayoff(const Lattice& lattice, std::vector<double> values);

  static TerminalPayoff from_function(const Lattice& lattice,
                                      const std::function<double(double state)>& f);
  /// Terminal step of a process.
  static TerminalPayoff from_process(const AdaptedProcess& x);

  const Lattice& lattice() const { return lattice_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  /// Plain expectation under the walk measure.
  double expectation() const;

 private:
  Lattice lattice_;
  std::vector<double> values_;
};

TerminalPayoff operator-(const TerminalPayoff& xi);

/// E[X_{k+1} | F_k]: average of the two children of every step-k node.
std::vector<double> conditional_expectation(const Lattice& lattice, int k,
                                            std::span<const double> next);

/// Discrete integrand Z_k = E_k[X_{k+1} dB] / dt = (X_up - X_down) / (2 sqrt(dt)).
std::vector<double> martingale_increment(const Lattice& lattice, int k,
                                         std::span<const double> next);

/// CSV dump with columns k,node_id,state,value.
void write_csv(std::ostream& out, const AdaptedProcess& x);
/// Lattice descriptor: every node with value = time.
void write_lattice_csv(std::ostream& out, const Lattice& lattice);

}  // namespace drbsde
