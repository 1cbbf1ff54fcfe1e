#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "drbsde/bsde.hpp"
#include "drbsde/doubly_reflected.hpp"
#include "drbsde/generator_registry.hpp"
#include "drbsde/lattice.hpp"

namespace drbsde {

inline constexpr const char* kVersion = "1.0.0";

enum class ProblemKind {
  bsde,
  rbsde,
  drbsde,
  dynkin_verify,
  penalization,
  pasting,
  axioms,
  hypotheses,
  mc_crosscheck
};

const char* to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

struct Tolerances {
  double pasting = 1e-10;  ///< direct vs pasted solution
  double game = 1e-10;     ///< oracle, saddle and Snell checks
  double axioms = 1e-10;
  /// MC cross-check: |dY0| <= 3 SE + mc_scale (1 + |Y|_inf).
  double mc_scale = 0.05;

  bool operator==(const Tolerances&) const = default;
};

struct McSettings {
  int dim = 1;
  std::size_t paths = 100000;
  int degree = 3;
  std::string basis = "polynomial";  ///< or indicator-bins
  int bins = 10;
  std::size_t batches = 20;

  bool operator==(const McSettings&) const = default;
};

/// One experiment. Obstacles and the terminal payoff are expressions over
/// (t, state); an absent obstacle is never binding.
struct ExperimentConfig {
  ProblemKind kind = ProblemKind::bsde;
  double horizon = 1.0;
  int steps = 8;
  LatticeMode mode = LatticeMode::recombining;
  Scheme scheme = Scheme::explicit_euler;
  GeneratorSpec generator;
  std::string terminal = "0";
  std::optional<std::string> lower;
  std::optional<std::string> upper;
  ObstacleSide side = ObstacleSide::lower;
  std::vector<double> schedule = default_penalty_schedule();
  PenaltyDirection direction = PenaltyDirection::increasing;
  Tolerances tolerances;
  std::uint64_t seed = 1;
  /// Axiom cases or hypothesis samples.
  std::size_t samples = 100;
  SamplingBox box;
  McSettings mc;
  std::string output = "out";

  bool operator==(const ExperimentConfig& other) const;
};

/// Missing keys take the defaults above; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::filesystem::path> out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

struct RunOutcome {
  /// 0 all verifications pass, 1 some verification failed, 2 config or
  /// size-guard error.
  int exit_code = 0;
  std::filesystem::path out_dir;
  std::string message;
};

/// Writes report.json, manifest.json and the kind's CSVs into the output
/// directory. Never throws for bad input; the outcome carries the code.
RunOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {});
RunOutcome run_config_file(const std::filesystem::path& path, const RunOptions& options = {});

struct SuiteRow {
  std::string name;
  std::string kind;
  int exit_code = 0;
  std::string message;
};

/// Runs every *.json in `dir` in name order, each into out/<stem>.
std::vector<SuiteRow> verify_all(const std::filesystem::path& dir,
                                 const std::filesystem::path& out, int jobs = 1);

}  // namespace drbsde
