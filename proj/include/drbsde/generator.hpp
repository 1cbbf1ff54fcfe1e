#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "drbsde/lattice.hpp"
#include "drbsde/stopping_rule.hpp"

namespace drbsde {

/// Constants of the standing assumptions on a driver:
///   z-lipschitz     |g(y,z) - g(y,z')| <= kappa |z - z'|
///   y-monotone      sgn(y - y') (g(y,z) - g(y',z)) <= lambda |y - y'|
///   y-continuous    g continuous in y
///   linear-growth   |g(y,0)| <= h + kappa |y|
///   z-sublinear     |g(y,z) - g(y,0)| <= kappa (h + |y| + |z|)^alpha
struct GeneratorConstants {
  double kappa = 1.0;
  double lambda = 0.0;
  double alpha = 0.5;
};

/// Structural facts the g-evaluation axiom checks are gated on. These are
/// declarations, set by whoever builds the driver; nothing infers them.
struct GeneratorTraits {
  bool y_free = false;          ///< g does not depend on y
  bool zero_at_zero_z = false;  ///< g(t, y, 0) = 0 for all y
  bool zero_at_origin = false;  ///< g(t, 0, 0) = 0
};

/// Driver g(t, state, y, z) of a backward equation, together with its declared
/// hypothesis constants and the bound process h. Immutable; copies share the
/// underlying callables.
class Generator {
 public:
  using Driver = std::function<double(const Node&, double y, double z)>;
  using Bound = std::function<double(const Node&)>;

  /// g = 0.
  Generator();
  Generator(Driver driver, GeneratorConstants constants, Bound h, GeneratorTraits traits = {},
            std::string name = "custom");

  double operator()(const Node& node, double y, double z) const { return driver_(node, y, z); }
  double h(const Node& node) const { return h_(node); }

  const GeneratorConstants& constants() const { return constants_; }
  const GeneratorTraits& traits() const { return traits_; }
  const std::string& name() const { return name_; }

  double kappa() const { return constants_.kappa; }
  double lambda() const { return constants_.lambda; }
  double lambda_plus() const { return constants_.lambda > 0.0 ? constants_.lambda : 0.0; }
  double alpha() const { return constants_.alpha; }

 private:
  Driver driver_;
  GeneratorConstants constants_;
  Bound h_;
  GeneratorTraits traits_;
  std::string name_;
};

Generator zero_generator();
/// g = c, with h = |c|.
Generator constant_generator(double c);
/// g = a y + b z.
Generator linear_generator(double a, double b);
/// g = a y + b sin(z).
Generator sine_generator(double a, double b);
/// g = k |z|.
Generator abs_z_generator(double k);

/// g + n (y - L)^-. The penalty is nonincreasing in y, so lambda is kept;
/// kappa grows by n and h by n L^+ so that linear-growth stays true.
Generator penalize_lower(const Generator& g, const AdaptedProcess& lower, double n);
/// g - n (y - U)^+, the mirror of penalize_lower.
Generator penalize_upper(const Generator& g, const AdaptedProcess& upper, double n);
/// g_-(y, z) = -g(-y, -z). An involution; constants carry over.
Generator negate_reflect(const Generator& g);
/// g 1{t <= tau} on the lattice: the driver contributes to the backward step
/// leaving node x only while tau has not stopped at or before x. lambda is
/// replaced by max(lambda, 0).
Generator stop_generator(const Generator& g, const StoppingRule& tau);

/// Sampling box for check_hypotheses.
struct SamplingBox {
  double t_min = 0.0, t_max = 1.0;
  double state_min = -3.0, state_max = 3.0;
  double y_min = -3.0, y_max = 3.0;
  double z_min = -3.0, z_max = 3.0;
};

struct HypothesisCounterexample {
  double t = 0.0, state = 0.0, y = 0.0, y_prime = 0.0, z = 0.0, z_prime = 0.0;
};

struct HypothesisVerdict {
  std::string name;
  bool pass = true;  ///< no sampled counterexample; not a proof
  /// Largest lhs / rhs seen; > 1 means a violation.
  double worst_ratio = 0.0;
  std::size_t samples = 0;
  std::optional<HypothesisCounterexample> counterexample;
};

struct HypothesisReport {
  std::array<HypothesisVerdict, 5> verdicts;  ///< in the order listed on GeneratorConstants
  bool all_pass() const;
};

struct HypothesisCheckOptions {
  std::size_t sample_count = 1000;
  std::uint64_t seed = 1;
  SamplingBox box;
  /// Continuity surrogate for y-continuous: |g(y + delta) - g(y)| / delta must stay
  /// below this bound.
  double continuity_bound = 1e3;
  double continuity_delta = 1e-6;
  /// When set, (t, state) are drawn from lattice nodes instead of the box, so
  /// drivers built on adapted processes can be checked.
  std::optional<Lattice> lattice;
};

/// Samples the hypotheses with the declared constants of g. A counterexample
/// is reported with the first violating tuple; pass means none was found.
HypothesisReport check_hypotheses(const Generator& g, const HypothesisCheckOptions& options);

}  // namespace drbsde
