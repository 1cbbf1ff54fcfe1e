#include "drbsde/experiment.hpp"
#include "drbsde/expression.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace drbsde {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kSource = DRBSDE_SOURCE_DIR;
const fs::path kLab = DRBSDE_LAB_PATH;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("drbsde_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

int lab(const std::string& args) {
  const int status = std::system((kLab.string() + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Expression, GrammarAndErrors) {
  const Expression e = Expression::parse("max(-0.5, min(0.5, 2 * state - t)) + abs(-3) * 0.5");
  EXPECT_DOUBLE_EQ(e(0.2, 0.1), 1.5 + 0.0);
  EXPECT_DOUBLE_EQ(e(0.0, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(e(0.0, -1.0), 1.0);
  EXPECT_DOUBLE_EQ(Expression::parse("--2 - -3")(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(Expression::parse("1e-1 * (t + 1)")(2, 0), 0.3);
  EXPECT_TRUE(Expression::parse("min(1, 2)").is_constant());
  EXPECT_FALSE(Expression::parse("state * 0").is_constant());
  for (const char* bad : {"", "1 +", "foo", "max(1)", "(1", "1 2", "abs 1", "exp(1)"}) {
    EXPECT_THROW(Expression::parse(bad), std::invalid_argument) << bad;
  }
  try {
    Expression::parse("1 + $");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("position 4"), std::string::npos) << e.what();
  }
}

TEST(Config, EveryShippedConfigRoundTrips) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(kSource / "configs")) {
    const ExperimentConfig c = load_config(entry.path());
    EXPECT_EQ(config_from_json(json::parse(config_to_json(c).dump())), c) << entry.path();
    ++seen;
  }
  EXPECT_GE(seen, 9);
}

TEST(Config, Rejections) {
  const json base = json::parse(R"({"kind": "bsde", "terminal": "state"})");
  EXPECT_NO_THROW(config_from_json(base));
  auto with = [&](const char* key, json value) {
    json j = base;
    j[key] = std::move(value);
    return j;
  };
  EXPECT_THROW(config_from_json(with("colour", "red")), std::invalid_argument);
  EXPECT_THROW(config_from_json(with("kind", "options")), std::invalid_argument);
  EXPECT_THROW(config_from_json(with("terminal", "state +")), std::invalid_argument);
  EXPECT_THROW(config_from_json(with("generator", "quadratic")), std::invalid_argument);
  EXPECT_THROW(config_from_json(with("scheme", "rk4")), std::invalid_argument);
  EXPECT_ANY_THROW(config_from_json(with("lattice", json{{"steps", "many"}})));
  EXPECT_THROW(config_from_json(with("lattice", json{{"depth", 3}})), std::invalid_argument);
  json pen = with("kind", "penalization");
  pen["lower"] = "0";
  pen["schedule"] = {4, 2};
  EXPECT_THROW(config_from_json(pen), std::invalid_argument);
}

TEST(Run, OneStepClampGameHasValueZero) {
  const fs::path out = scratch("clamp");
  RunOptions opt;
  opt.out = out;
  const RunOutcome r = run_config_file(kSource / "configs" / "dynkin_one_step.json", opt);
  EXPECT_EQ(r.exit_code, 0) << r.message;
  const json report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report.at("pass"), true);
  const json& game = report.at("game");
  EXPECT_EQ(game.at("sup_inf").get<double>(), 0.0);
  EXPECT_EQ(game.at("inf_sup").get<double>(), 0.0);
  EXPECT_EQ(game.at("y0").get<double>(), 0.0);
  EXPECT_TRUE(fs::exists(out / "pairs.csv"));
  const json manifest = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest.at("version"), kVersion);
  EXPECT_EQ(manifest.at("exit_code"), 0);
  EXPECT_EQ(manifest.at("config_hash"), report.at("config_hash"));
}

TEST(Run, PenalizationGapColumnIsMonotone) {
  const fs::path out = scratch("pen");
  RunOptions opt;
  opt.out = out;
  EXPECT_EQ(run_config_file(kSource / "configs" / "penalization_lower.json", opt).exit_code, 0);
  std::istringstream csv(slurp(out / "penalization.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "n,sup_gap,violations");
  double previous = INFINITY;
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    const double gap = std::stod(line.substr(a + 1, b - a - 1));
    EXPECT_LE(gap, previous);
    EXPECT_EQ(line.substr(b + 1), "0");
    previous = gap;
    ++rows;
  }
  EXPECT_EQ(rows, 11);
  EXPECT_GT(previous, 0.0);
}

TEST(Run, SeparationErrorNamesTheNode) {
  const fs::path out = scratch("sep");
  RunOptions opt;
  opt.out = out;
  const RunOutcome r = run_config_file(kSource / "tests" / "data" / "bad_separation.json", opt);
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.message.find("step 4, node 4"), std::string::npos) << r.message;
  const json report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report.at("pass"), false);
  EXPECT_NE(report.at("error").get<std::string>().find("not separated"), std::string::npos);
}

TEST(Run, FailedVerificationExitsOne) {
  ExperimentConfig c = config_from_json(json::parse(R"({"kind": "hypotheses", "generator": "abs-z:1"})"));
  const fs::path out = scratch("hyp");
  RunOptions opt;
  opt.out = out;
  const RunOutcome r = run_experiment(c, opt);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST(Run, SizeGuardsExitTwo) {
  RunOptions opt;
  opt.out = scratch("size");
  ExperimentConfig big = config_from_json(
      json::parse(R"({"kind": "dynkin-verify", "lattice": {"steps": 6, "mode": "full-tree"},
                      "lower": "-1", "upper": "1"})"));
  EXPECT_EQ(run_experiment(big, opt).exit_code, 2);
  ExperimentConfig tree = config_from_json(
      json::parse(R"({"kind": "bsde", "lattice": {"steps": 40, "mode": "full-tree"}})"));
  EXPECT_EQ(run_experiment(tree, opt).exit_code, 2);
}

TEST(Run, ReportsAreByteIdentical) {
  for (const char* name : {"drbsde_sine", "mc_crosscheck", "axioms_sine"}) {
    RunOptions a, b;
    a.out = scratch(std::string(name) + "_a");
    b.out = scratch(std::string(name) + "_b");
    b.jobs = 3;
    const fs::path config = kSource / "configs" / (std::string(name) + ".json");
    ASSERT_EQ(run_config_file(config, a).exit_code, 0) << name;
    ASSERT_EQ(run_config_file(config, b).exit_code, 0) << name;
    for (const auto& entry : fs::directory_iterator(*a.out)) {
      const auto file = entry.path().filename();
      if (file == "manifest.json") continue;
      EXPECT_EQ(slurp(*a.out / file), slurp(*b.out / file)) << name << "/" << file;
    }
  }
}

TEST(Run, SeedOverrideReachesTheManifest) {
  RunOptions opt;
  opt.out = scratch("seed");
  opt.seed = 1234;
  run_config_file(kSource / "configs" / "axioms_sine.json", opt);
  const json manifest = json::parse(slurp(*opt.out / "manifest.json"));
  EXPECT_EQ(manifest.at("config").at("seed"), 1234);
}

TEST(Binary, ExitCodes) {
  const fs::path out = scratch("bin");
  EXPECT_EQ(lab("run " + (kSource / "configs" / "dynkin_one_step.json").string() + " --out " +
                (out / "ok").string()),
            0);
  EXPECT_EQ(lab("run " + (kSource / "tests" / "data" / "bad_separation.json").string() +
                " --out " + (out / "bad").string()),
            2);
  EXPECT_EQ(lab("run " + (out / "missing.json").string()), 2);
  EXPECT_EQ(lab("frobnicate"), 2);
  EXPECT_EQ(lab("verify-all " + (kSource / "tests" / "data").string() + " --out " +
                (out / "suite").string()),
            2);
}

TEST(Suite, RowsFollowFileOrder) {
  const auto rows = verify_all(kSource / "tests" / "data", scratch("suite"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].name, "bad_separation");
  EXPECT_EQ(rows[0].kind, "drbsde");
  EXPECT_EQ(rows[0].exit_code, 2);
  EXPECT_THROW(verify_all(kSource / "nowhere", scratch("suite2")), std::invalid_argument);
}

}  // namespace
}  // namespace drbsde
