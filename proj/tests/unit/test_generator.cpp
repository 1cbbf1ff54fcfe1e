#include "drbsde/generator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "drbsde/generator_registry.hpp"
#include "test_support.hpp"

namespace drbsde {
namespace {

const Node kOrigin{-1, 0, 0.5, 0.0};

TEST(Generator, Factories) {
  EXPECT_EQ(zero_generator()(kOrigin, 3.0, -2.0), 0.0);
  EXPECT_EQ(constant_generator(0.7)(kOrigin, 3.0, -2.0), 0.7);
  EXPECT_DOUBLE_EQ(constant_generator(-0.7).h(kOrigin), 0.7);
  EXPECT_DOUBLE_EQ(linear_generator(-1.0, 0.5)(kOrigin, 2.0, 4.0), 0.0);
  EXPECT_DOUBLE_EQ(sine_generator(-1.0, 0.5)(kOrigin, 1.0, M_PI / 2), -0.5);
  EXPECT_DOUBLE_EQ(abs_z_generator(2.0)(kOrigin, 1.0, -3.0), 6.0);
  EXPECT_EQ(linear_generator(-1.0, 0.5).lambda_plus(), 0.0);
  EXPECT_EQ(linear_generator(2.0, 0.5).lambda_plus(), 2.0);
  EXPECT_TRUE(zero_generator().traits().y_free);
  EXPECT_FALSE(constant_generator(1.0).traits().zero_at_zero_z);
  EXPECT_FALSE(linear_generator(1.0, 0.0).traits().y_free);
}

TEST(Generator, ConstantsAreValidated) {
  auto f = [](const Node&, double, double) { return 0.0; };
  EXPECT_THROW(Generator(f, {0.0, 0.0, 0.5}, nullptr), std::invalid_argument);
  EXPECT_THROW(Generator(f, {1.0, 0.0, 1.0}, nullptr), std::invalid_argument);
  EXPECT_THROW(Generator(nullptr, {}, nullptr), std::invalid_argument);
}

TEST(Generator, PenaltiesAreOrderedAndMonotoneInTheLevel) {
  const Lattice lat = Lattice::build(1.0, 6, LatticeMode::recombining);
  std::mt19937_64 rng(9);
  const AdaptedProcess obstacle = testing::random_process(lat, rng, -1.0, 1.0);
  const Generator g = sine_generator(-0.5, 0.7);
  for (int s = 0; s < 500; ++s) {
    const int k = std::uniform_int_distribution<int>(0, 6)(rng);
    const auto i = std::uniform_int_distribution<std::size_t>(0, lat.nodes_at(k) - 1)(rng);
    const Node x = lat.node(k, i);
    const double y = testing::uniform(rng, -2, 2);
    const double z = testing::uniform(rng, -2, 2);
    const double n1 = testing::uniform(rng, 0, 50);
    const double n2 = n1 + testing::uniform(rng, 0, 50);
    const double lo1 = penalize_lower(g, obstacle, n1)(x, y, z);
    const double lo2 = penalize_lower(g, obstacle, n2)(x, y, z);
    const double up1 = penalize_upper(g, obstacle, n1)(x, y, z);
    const double up2 = penalize_upper(g, obstacle, n2)(x, y, z);
    EXPECT_GE(lo1, g(x, y, z));
    EXPECT_LE(lo1, lo2);
    EXPECT_LE(up1, g(x, y, z));
    EXPECT_GE(up1, up2);
  }
  EXPECT_THROW(penalize_lower(g, obstacle, -1.0), std::invalid_argument);
  EXPECT_EQ(penalize_lower(g, obstacle, 0.0).name(), g.name());
  EXPECT_DOUBLE_EQ(penalize_lower(g, obstacle, 3.0).kappa(), g.kappa() + 3.0);
}

TEST(Generator, PenalizedDriversKeepTheirHypotheses) {
  const Lattice lat = Lattice::build(1.0, 6, LatticeMode::recombining);
  std::mt19937_64 rng(10);
  const AdaptedProcess obstacle = testing::random_process(lat, rng, -1.0, 1.0);
  HypothesisCheckOptions opt;
  opt.lattice = lat;
  for (const auto& g : {penalize_lower(sine_generator(-0.5, 0.7), obstacle, 8.0),
                        penalize_upper(linear_generator(0.3, -0.2), obstacle, 8.0)}) {
    const auto r = check_hypotheses(g, opt);
    for (const auto& v : r.verdicts) EXPECT_TRUE(v.pass) << g.name() << " " << v.name;
  }
}

TEST(Generator, NegateReflectIsAnInvolution) {
  const Generator g = sine_generator(-0.3, 0.8);
  const Generator gg = negate_reflect(negate_reflect(g));
  std::mt19937_64 rng(4);
  for (int s = 0; s < 100; ++s) {
    const double y = testing::uniform(rng, -3, 3), z = testing::uniform(rng, -3, 3);
    EXPECT_DOUBLE_EQ(gg(kOrigin, y, z), g(kOrigin, y, z));
    EXPECT_DOUBLE_EQ(negate_reflect(g)(kOrigin, y, z), -g(kOrigin, -y, -z));
  }
}

TEST(Generator, StoppedDriverSwitchesOffAfterTheRule) {
  const Lattice lat = Lattice::build(1.0, 3, LatticeMode::full_tree);
  StoppingRule tau(lat);
  tau.set(1, 1, true);
  const Generator g = stop_generator(constant_generator(2.0), tau);
  EXPECT_EQ(g(lat.node(0, 0), 0, 0), 2.0);
  EXPECT_EQ(g(lat.node(1, 0), 0, 0), 2.0);
  EXPECT_EQ(g(lat.node(1, 1), 0, 0), 0.0);
  EXPECT_EQ(g(lat.node(2, 3), 0, 0), 0.0);
  EXPECT_THROW(g(kOrigin, 0, 0), std::out_of_range);
  EXPECT_EQ(stop_generator(linear_generator(-1.0, 0.0), tau).lambda(), 0.0);
}

TEST(Generator, HypothesisCheckerFindsMisdeclaredConstants) {
  HypothesisCheckOptions opt;
  for (const auto& g : {zero_generator(), constant_generator(1.5), linear_generator(-1.0, 0.5),
                        sine_generator(-1.0, 0.5)}) {
    for (const auto& v : check_hypotheses(g, opt).verdicts) {
      EXPECT_TRUE(v.pass) << g.name() << " " << v.name << " ratio " << v.worst_ratio;
    }
  }
  // k |z| grows linearly in z, so the sublinear growth bound fails once |z|
  // is large enough.
  const auto abs_z = check_hypotheses(abs_z_generator(1.0), opt);
  EXPECT_TRUE(abs_z.verdicts[0].pass);
  EXPECT_FALSE(abs_z.verdicts[4].pass);
  EXPECT_EQ(abs_z.verdicts[4].name, "z-sublinear");

  GeneratorSpec spec{"linear:0.5,2", 1.0, std::nullopt, std::nullopt, std::nullopt};
  const auto bad_kappa = check_hypotheses(make_generator(spec), opt);
  EXPECT_FALSE(bad_kappa.verdicts[0].pass);
  ASSERT_TRUE(bad_kappa.verdicts[0].counterexample.has_value());
  EXPECT_GT(bad_kappa.verdicts[0].worst_ratio, 1.0);

  GeneratorSpec lam{"linear:0.5,0", std::nullopt, 0.0, std::nullopt, std::nullopt};
  EXPECT_FALSE(check_hypotheses(make_generator(lam), opt).verdicts[1].pass);

  // Linear growth with h = 0 fails for a nonzero constant driver near y = 0.
  GeneratorSpec h{"constant:2", std::nullopt, std::nullopt, std::nullopt, 0.0};
  EXPECT_FALSE(check_hypotheses(make_generator(h), opt).verdicts[3].pass);

  auto steep = Generator([](const Node&, double y, double) { return -5000.0 * y; }, {},
                         [](const Node&) { return 0.0; });
  EXPECT_FALSE(check_hypotheses(steep, opt).verdicts[2].pass);
}

TEST(GeneratorRegistry, NamesAndOverrides) {
  EXPECT_EQ(make_generator({"zero"})(kOrigin, 1, 1), 0.0);
  EXPECT_EQ(make_generator({"constant:0.25"})(kOrigin, 1, 1), 0.25);
  EXPECT_DOUBLE_EQ(make_generator({"linear:-1,0.5"})(kOrigin, 1, 2), 0.0);
  EXPECT_DOUBLE_EQ(make_generator({"sine:0,1"})(kOrigin, 1, M_PI / 2), 1.0);
  EXPECT_DOUBLE_EQ(make_generator({"abs-z:3"})(kOrigin, 1, -1), 3.0);
  const Generator g = make_generator({"linear:-1,0.5", 4.0, 0.5, 0.25, 2.0});
  EXPECT_EQ(g.kappa(), 4.0);
  EXPECT_EQ(g.lambda(), 0.5);
  EXPECT_EQ(g.alpha(), 0.25);
  EXPECT_EQ(g.h(kOrigin), 2.0);
  EXPECT_THROW(make_generator({"quadratic:1"}), std::invalid_argument);
  EXPECT_THROW(make_generator({"linear:1"}), std::invalid_argument);
  EXPECT_THROW(make_generator({"constant:abc"}), std::invalid_argument);
  EXPECT_THROW(make_generator({"driver-file:/nonexistent/table.json"}), std::invalid_argument);
}

TEST(GeneratorRegistry, DriverFileInterpolatesMultilinearly) {
  const std::string path = ::testing::TempDir() + "driver_table.json";
  {
    std::ofstream out(path);
    out << R"({"t": [0, 1], "state": [-1, 1], "y": [-1, 1], "z": [-1, 1], "kappa": 2, "h": 0.5, "values": [)";
    bool first = true;
    for (double t : {0, 1}) {
      for (double x : {-1, 1}) {
        for (double y : {-1, 1}) {
          for (double z : {-1, 1}) {
            out << (first ? "" : ",") << (y + 2 * z + 0.5 * t * x);
            first = false;
          }
        }
      }
    }
    out << "]}";
  }
  const Generator g = make_generator({"driver-file:" + path});
  EXPECT_EQ(g.kappa(), 2.0);
  EXPECT_EQ(g.h(kOrigin), 0.5);
  // Trilinear in (y, z) and bilinear in (t, state): exact at interior points.
  EXPECT_NEAR(g(Node{-1, 0, 0.5, 0.3}, 0.2, -0.4), 0.2 - 0.8 + 0.5 * 0.5 * 0.3, 1e-14);
  // Clamped outside the grid.
  EXPECT_NEAR(g(Node{-1, 0, 0.0, 0.0}, 5.0, 0.0), 1.0, 1e-14);

  std::ofstream(path) << R"({"t": [0, 0], "state": [0], "y": [0], "z": [0], "values": [0, 0]})";
  EXPECT_THROW(make_generator({"driver-file:" + path}), std::invalid_argument);
  std::ofstream(path) << R"({"t": [0], "state": [0], "y": [0], "z": [0], "values": [0, 0]})";
  EXPECT_THROW(make_generator({"driver-file:" + path}), std::invalid_argument);
}

}  // namespace
}  // namespace drbsde
