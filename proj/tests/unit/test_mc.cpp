#include "drbsde/mc.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "drbsde/doubly_reflected.hpp"

namespace drbsde {
namespace {

double first(std::span<const double> x) { return x[0]; }

TEST(Paths, ReproducibleAndIndependentOfJobs) {
  const PathBundle a = simulate_paths(2, 1.0, 8, 500, 42, 1);
  const PathBundle b = simulate_paths(2, 1.0, 8, 500, 42, 3);
  const PathBundle c = simulate_paths(2, 1.0, 8, 200, 42, 1);
  const PathBundle d = simulate_paths(2, 1.0, 8, 500, 43, 1);
  EXPECT_EQ(a.increments, b.increments);
  EXPECT_EQ(a.states, b.states);
  EXPECT_TRUE(std::equal(c.increments.begin(), c.increments.end(), a.increments.begin()));
  EXPECT_NE(a.increments, d.increments);
  for (std::size_t m = 0; m < 500; ++m) {
    EXPECT_EQ(a.state(m, 0)[0], 0.0);
    for (int k = 0; k < 8; ++k) {
      for (int c2 = 0; c2 < 2; ++c2) {
        EXPECT_NEAR(a.state(m, k + 1)[c2] - a.state(m, k)[c2], a.increment(m, k, c2), 1e-15);
      }
    }
  }
}

TEST(Paths, SanityGate) {
  const PathBundle p = simulate_paths(3, 2.0, 10, 20000, 7);
  ASSERT_EQ(p.gate.mean.size(), 3u);
  EXPECT_TRUE(p.gate.pass);
  EXPECT_NEAR(p.gate.mean_bound, 3.0 / std::sqrt(20000.0), 1e-15);
  for (int c = 0; c < 3; ++c) {
    EXPECT_LE(std::abs(p.gate.mean[c]), p.gate.mean_bound);
    EXPECT_NEAR(p.gate.variance[c], 1.0, 0.1);
  }
  EXPECT_LE(p.gate.max_cross_correlation, 3.0 / std::sqrt(20000.0));
  // Empirical variance of B_T against T.
  double sum = 0.0, sq = 0.0;
  for (std::size_t m = 0; m < p.paths; ++m) {
    sum += p.state(m, 10)[0];
    sq += p.state(m, 10)[0] * p.state(m, 10)[0];
  }
  const double mean = sum / p.paths;
  EXPECT_NEAR(sq / p.paths - mean * mean, 2.0, 0.1);
}

TEST(Paths, Guards) {
  EXPECT_THROW(simulate_paths(1, 1.0, 4, 99, 1), std::invalid_argument);
  EXPECT_THROW(simulate_paths(0, 1.0, 4, 100, 1), std::invalid_argument);
  EXPECT_THROW(simulate_paths(1, -1.0, 4, 100, 1), std::invalid_argument);
  EXPECT_THROW(simulate_paths(4, 1.0, 1 << 13, 1 << 14, 1), std::length_error);
}

TEST(Basis, HermiteValuesAndSizes) {
  const RegressionBasis poly{BasisFamily::polynomial, 3, 10};
  EXPECT_EQ(poly.size(1), 4u);
  EXPECT_EQ(poly.size(2), 10u);
  EXPECT_EQ((RegressionBasis{BasisFamily::polynomial, 2, 10}.size(3)), 10u);
  std::vector<double> out(4);
  const double x = 0.7;
  poly.evaluate(std::vector<double>{x}, out);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], x);
  EXPECT_DOUBLE_EQ(out[2], x * x - 1);
  EXPECT_DOUBLE_EQ(out[3], x * x * x - 3 * x);
  const RegressionBasis bins{BasisFamily::indicator_bins, 3, 6};
  EXPECT_EQ(bins.size(2), 6u);
  std::vector<double> b(6);
  for (double u : {-10.0, -2.5, -0.1, 0.1, 2.9, 50.0}) {
    bins.evaluate(std::vector<double>{u, 1.0}, b);
    double total = 0.0;
    for (double v : b) total += v;
    EXPECT_EQ(total, 1.0);
  }
  bins.evaluate(std::vector<double>{-10.0, 0.0}, b);
  EXPECT_EQ(b[0], 1.0);
  bins.evaluate(std::vector<double>{0.5, 0.0}, b);
  EXPECT_EQ(b[3], 1.0);
  EXPECT_THROW(poly.evaluate(std::vector<double>{1.0}, b), std::invalid_argument);
}

TEST(Mc, LinearDriverOnAConstantPayoffIsExact) {
  const PathBundle p = simulate_paths(1, 1.0, 10, 1000, 3);
  McProblem prob;
  prob.terminal = [](std::span<const double>) { return 1.0; };
  const McResult r = solve_mc(p, prob, linear_generator(-0.7, 0.0), RegressionBasis{});
  EXPECT_NEAR(r.y0, std::pow(1 - 0.07, 10), 1e-12);
  EXPECT_NEAR(r.standard_error, 0.0, 1e-12);
}

TEST(Mc, QuadraticPayoffUnderZeroDriver) {
  const PathBundle p = simulate_paths(1, 1.0, 8, 20000, 5);
  McProblem prob;
  prob.terminal = [](std::span<const double> x) { return x[0] * x[0]; };
  const McResult r = solve_mc(p, prob, zero_generator(), RegressionBasis{BasisFamily::polynomial, 2});
  EXPECT_GT(r.standard_error, 0.0);
  EXPECT_LE(std::abs(r.y0 - 1.0), 4 * r.standard_error);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Mc, AgreesWithTheLatticeOnADoublyReflectedProblem) {
  auto lower = [](double t, double x) { return -0.4 + 0.2 * t + 0.1 * x; };
  auto upper = [](double t, double x) { return 0.4 - 0.1 * t + 0.1 * x; };
  auto terminal = [&](double x) { return std::clamp(2 * x, lower(1, x), upper(1, x)); };
  const Generator g = sine_generator(-1.0, 0.5);

  const Lattice lat = Lattice::build(1.0, 16, LatticeMode::recombining);
  const DynkinGame game{TerminalPayoff::from_function(lat, terminal), g,
                        AdaptedProcess::from_function(lat, lower),
                        AdaptedProcess::from_function(lat, upper)};
  const double lattice_y0 = solve_drbsde(lat, game).y(0, 0);

  McProblem prob;
  prob.terminal = [&](std::span<const double> x) { return terminal(first(x)); };
  prob.lower = [&](double t, std::span<const double> x) { return lower(t, first(x)); };
  prob.upper = [&](double t, std::span<const double> x) { return upper(t, first(x)); };
  const PathBundle p = simulate_paths(1, 1.0, 16, 20000, 11);
  McOptions opt;
  const McResult r = solve_mc(p, prob, g, RegressionBasis{}, opt);
  EXPECT_LE(std::abs(r.y0 - lattice_y0), 3 * r.standard_error + 0.05 * (1 + std::abs(lattice_y0)));
  EXPECT_EQ(r.obstacle_violations, 0u);
  EXPECT_EQ(r.flat_off_lower, 0.0);
  EXPECT_EQ(r.flat_off_upper, 0.0);

  opt.jobs = 3;
  const McResult again = solve_mc(p, prob, g, RegressionBasis{}, opt);
  EXPECT_EQ(r.y0, again.y0);
  EXPECT_EQ(r.standard_error, again.standard_error);

  // A lower obstacle through the penalty stays below the reflected value.
  McProblem lower_only;
  lower_only.terminal = prob.terminal;
  lower_only.lower = prob.lower;
  const double reflected = solve_mc(p, lower_only, g, RegressionBasis{}, opt).y0;
  lower_only.penalty = 8.0;
  EXPECT_LE(solve_mc(p, lower_only, g, RegressionBasis{}, opt).y0, reflected + 1e-12);
}

TEST(Mc, SingularRegressionIsFatal) {
  const PathBundle p = simulate_paths(1, 1.0, 4, 100, 1);
  McProblem prob;
  prob.terminal = [](std::span<const double> x) { return x[0]; };
  try {
    solve_mc(p, prob, zero_generator(), RegressionBasis{BasisFamily::indicator_bins, 3, 400});
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("singular regression at step"), std::string::npos);
  }
  EXPECT_THROW(solve_mc(p, McProblem{}, zero_generator(), RegressionBasis{}), std::invalid_argument);
}

TEST(Mc, Serialization) {
  const PathBundle p = simulate_paths(1, 1.0, 2, 100, 9);
  std::ostringstream csv;
  write_bundle_csv(csv, p);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "path,k,coordinate,increment,state");
  McResult r;
  r.y0 = 0.25;
  EXPECT_NE(mc_result_json(r, p, RegressionBasis{}).find("\"y0\": 0.25"), std::string::npos);
}

}  // namespace
}  // namespace drbsde
