#include "drbsde/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "drbsde/dynkin.hpp"
#include "drbsde/expression.hpp"
#include "drbsde/io.hpp"
#include "drbsde/mc.hpp"
#include "drbsde/rbsde.hpp"

namespace drbsde {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kKindNames[] = {"bsde",         "rbsde",   "drbsde",
                                      "dynkin-verify", "penalization", "pasting",
                                      "axioms",       "hypotheses", "mc-crosscheck"};

// Obstacle used for a side the config leaves open.
constexpr double kFarObstacle = 1e6;

}  // namespace

const char* to_string(ProblemKind kind) { return kKindNames[static_cast<int>(kind)]; }

ProblemKind problem_kind_from_string(const std::string& name) {
  for (int i = 0; i < 9; ++i) {
    if (name == kKindNames[i]) return static_cast<ProblemKind>(i);
  }
  throw std::invalid_argument("unknown problem kind '" + name + "'");
}

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  auto box_eq = [](const SamplingBox& a, const SamplingBox& b) {
    return a.t_min == b.t_min && a.t_max == b.t_max && a.state_min == b.state_min &&
           a.state_max == b.state_max && a.y_min == b.y_min && a.y_max == b.y_max &&
           a.z_min == b.z_min && a.z_max == b.z_max;
  };
  return kind == o.kind && horizon == o.horizon && steps == o.steps && mode == o.mode &&
         scheme == o.scheme && generator == o.generator && terminal == o.terminal &&
         lower == o.lower && upper == o.upper && side == o.side && schedule == o.schedule &&
         direction == o.direction && tolerances == o.tolerances && seed == o.seed &&
         samples == o.samples && box_eq(box, o.box) && mc == o.mc && output == o.output;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; })) {
      throw std::invalid_argument("unknown key '" + k + "' in " + where);
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) {
    throw std::invalid_argument(std::string("box.") + key + " must be a [min, max] pair");
  }
  lo = r[0].get<double>();
  hi = r[1].get<double>();
  if (!(lo <= hi)) throw std::invalid_argument(std::string("box.") + key + " has min > max");
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"kind", "lattice", "scheme", "generator", "terminal", "lower", "upper", "side",
                  "schedule", "direction", "tolerances", "seed", "samples", "box", "mc", "output"},
                 "config");
  ExperimentConfig c;
  if (!j.contains("kind")) throw std::invalid_argument("config needs a 'kind'");
  c.kind = problem_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("lattice")) {
    const auto& l = j.at("lattice");
    reject_unknown(l, {"horizon", "steps", "mode"}, "lattice");
    read(l, "horizon", c.horizon);
    read(l, "steps", c.steps);
    if (l.contains("mode")) c.mode = lattice_mode_from_string(l.at("mode").get<std::string>());
  }
  if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    if (g.is_string()) {
      c.generator.name = g.get<std::string>();
    } else {
      reject_unknown(g, {"name", "kappa", "lambda", "alpha", "h"}, "generator");
      read(g, "name", c.generator.name);
      if (g.contains("kappa")) c.generator.kappa = g.at("kappa").get<double>();
      if (g.contains("lambda")) c.generator.lambda = g.at("lambda").get<double>();
      if (g.contains("alpha")) c.generator.alpha = g.at("alpha").get<double>();
      if (g.contains("h")) c.generator.h = g.at("h").get<double>();
    }
  }
  read(j, "terminal", c.terminal);
  if (j.contains("lower")) c.lower = j.at("lower").get<std::string>();
  if (j.contains("upper")) c.upper = j.at("upper").get<std::string>();
  if (j.contains("side")) c.side = obstacle_side_from_string(j.at("side").get<std::string>());
  read(j, "schedule", c.schedule);
  if (j.contains("direction")) {
    c.direction = penalty_direction_from_string(j.at("direction").get<std::string>());
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    reject_unknown(t, {"pasting", "game", "axioms", "mc_scale"}, "tolerances");
    read(t, "pasting", c.tolerances.pasting);
    read(t, "game", c.tolerances.game);
    read(t, "axioms", c.tolerances.axioms);
    read(t, "mc_scale", c.tolerances.mc_scale);
  }
  read(j, "seed", c.seed);
  read(j, "samples", c.samples);
  if (j.contains("box")) {
    const auto& b = j.at("box");
    reject_unknown(b, {"t", "state", "y", "z"}, "box");
    read_range(b, "t", c.box.t_min, c.box.t_max);
    read_range(b, "state", c.box.state_min, c.box.state_max);
    read_range(b, "y", c.box.y_min, c.box.y_max);
    read_range(b, "z", c.box.z_min, c.box.z_max);
  }
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    reject_unknown(m, {"dim", "paths", "degree", "basis", "bins", "batches"}, "mc");
    read(m, "dim", c.mc.dim);
    read(m, "paths", c.mc.paths);
    read(m, "degree", c.mc.degree);
    read(m, "basis", c.mc.basis);
    read(m, "bins", c.mc.bins);
    read(m, "batches", c.mc.batches);
    if (c.mc.basis != "polynomial" && c.mc.basis != "indicator-bins") {
      throw std::invalid_argument("unknown regression basis '" + c.mc.basis + "'");
    }
  }
  read(j, "output", c.output);

  // Resolve everything that can be resolved without running.
  make_generator(c.generator);
  Expression::parse(c.terminal);
  if (c.lower) Expression::parse(*c.lower);
  if (c.upper) Expression::parse(*c.upper);
  if (c.kind == ProblemKind::penalization || c.kind == ProblemKind::drbsde) {
    validate_schedule(c.schedule);
  }
  return c;
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["kind"] = to_string(c.kind);
  j["lattice"] = {{"horizon", c.horizon}, {"steps", c.steps}, {"mode", to_string(c.mode)}};
  j["scheme"] = to_string(c.scheme);
  ordered_json g;
  g["name"] = c.generator.name;
  if (c.generator.kappa) g["kappa"] = *c.generator.kappa;
  if (c.generator.lambda) g["lambda"] = *c.generator.lambda;
  if (c.generator.alpha) g["alpha"] = *c.generator.alpha;
  if (c.generator.h) g["h"] = *c.generator.h;
  j["generator"] = g;
  j["terminal"] = c.terminal;
  if (c.lower) j["lower"] = *c.lower;
  if (c.upper) j["upper"] = *c.upper;
  j["side"] = to_string(c.side);
  j["schedule"] = c.schedule;
  j["direction"] = to_string(c.direction);
  j["tolerances"] = {{"pasting", c.tolerances.pasting},
                     {"game", c.tolerances.game},
                     {"axioms", c.tolerances.axioms},
                     {"mc_scale", c.tolerances.mc_scale}};
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["box"] = {{"t", {c.box.t_min, c.box.t_max}},
              {"state", {c.box.state_min, c.box.state_max}},
              {"y", {c.box.y_min, c.box.y_max}},
              {"z", {c.box.z_min, c.box.z_max}}};
  j["mc"] = {{"dim", c.mc.dim},     {"paths", c.mc.paths}, {"degree", c.mc.degree},
             {"basis", c.mc.basis}, {"bins", c.mc.bins},   {"batches", c.mc.batches}};
  j["output"] = c.output;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

namespace {

// A verification with its measured value and the bound it must respect.
struct Checks {
  ordered_json list = ordered_json::array();
  bool pass = true;

  void add(const std::string& name, double value, double bound) {
    const bool ok = value <= bound;
    list.push_back({{"name", name}, {"value", value}, {"bound", bound}, {"pass", ok}});
    pass = pass && ok;
  }
  void require(const std::string& name, bool ok) {
    list.push_back({{"name", name}, {"pass", ok}});
    pass = pass && ok;
  }
};

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

template <class Writer>
void write_with(const std::filesystem::path& p, Writer&& w) {
  std::ostringstream s;
  w(s);
  write_file(p, s.str());
}

ordered_json parse_ordered(const std::string& text) { return ordered_json::parse(text); }

struct Problem {
  Lattice lattice;
  Generator g;
  Expression terminal;
  std::optional<Expression> lower, upper;

  TerminalPayoff xi() const {
    const double T = lattice.horizon();
    const Expression e = terminal;
    return TerminalPayoff::from_function(lattice, [e, T](double x) { return e(T, x); });
  }
  AdaptedProcess process(const std::optional<Expression>& e, double fallback) const {
    if (!e) return AdaptedProcess(lattice, fallback);
    const Expression f = *e;
    return AdaptedProcess::from_function(lattice, [f](double t, double x) { return f(t, x); });
  }
  AdaptedProcess obstacle(ObstacleSide side) const {
    const auto& e = side == ObstacleSide::lower ? lower : upper;
    if (!e) {
      throw std::invalid_argument(std::string("config needs a '") + to_string(side) +
                                  "' obstacle");
    }
    return process(e, 0.0);
  }
  DynkinGame game() const {
    return DynkinGame{xi(), g, process(lower, -kFarObstacle), process(upper, kFarObstacle)};
  }
};

ordered_json axiom_json(const AxiomReport& r) {
  ordered_json out = ordered_json::array();
  for (const auto& a : r.axioms) {
    out.push_back({{"name", a.name},
                   {"checked", a.checked},
                   {"skipped", a.skipped},
                   {"max_violation", a.max_violation},
                   {"pass", a.pass}});
  }
  return out;
}

ordered_json penalization_json(const PenalizationReport& r) {
  ordered_json j;
  j["side"] = to_string(r.side);
  j["schedule"] = r.schedule;
  j["sup_gap"] = r.sup_gap;
  j["violations"] = r.violations;
  j["envelope"] = r.envelope;
  j["squeeze_violations"] = r.squeeze_violations;
  j["converged"] = r.converged;
  j["final_gap"] = r.final_gap;
  j["tolerance"] = r.tolerance;
  return j;
}

void penalization_checks(const PenalizationReport& r, double scale, Checks& checks) {
  std::size_t violations = 0, squeeze = 0;
  for (auto v : r.violations) violations += v;
  for (auto v : r.squeeze_violations) squeeze += v;
  checks.add("monotonicity_violations", static_cast<double>(violations), 0.0);
  checks.add("squeeze_violations", static_cast<double>(squeeze), 0.0);
  checks.add("final_gap_within_envelope", r.final_gap,
             r.envelope.back() + monotonicity_slack(scale));
}

// Runs one kind; fills the report and returns whether every check passed.
bool dispatch(const ExperimentConfig& c, const Problem& p, const std::filesystem::path& dir,
              int jobs, ordered_json& report) {
  const Lattice& lat = p.lattice;
  Checks checks;
  auto save_solution = [&](const Solution& s, const char* name) {
    write_with(dir / name, [&](std::ostream& o) { write_solution_csv(o, s); });
  };

  switch (c.kind) {
    case ProblemKind::bsde: {
      const Solution s = solve_bsde(lat, p.xi(), p.g, c.scheme);
      save_solution(s, "solution.csv");
      report["y0"] = s.y(0, 0);
      report["solver"] = parse_ordered(metadata_json(s.meta));
      checks.require("finite_solution", std::isfinite(s.y.sup_norm()));
      break;
    }
    case ProblemKind::rbsde: {
      const AdaptedProcess obstacle = p.obstacle(c.side);
      const TerminalPayoff xi = p.xi();
      const Solution s = solve_rbsde(lat, xi, p.g, obstacle, c.side, c.scheme);
      save_solution(s, "solution.csv");
      report["y0"] = s.y(0, 0);
      report["solver"] = parse_ordered(metadata_json(s.meta));
      const auto flat = flat_off_residual(s);
      checks.add("flat_off", std::max(flat.lower, flat.upper), 0.0);
      std::size_t wrong_side = 0;
      const auto y = s.y.values();
      const auto b = obstacle.values();
      for (std::size_t id = 0; id < y.size(); ++id) {
        if (c.side == ObstacleSide::lower ? y[id] < b[id] : y[id] > b[id]) ++wrong_side;
      }
      checks.add("obstacle_order_violations", static_cast<double>(wrong_side), 0.0);
      const SnellReport back =
          verify_snell(lat, s, xi, p.g, SnellMode::backward, c.scheme, c.tolerances.game, c.seed);
      checks.add("snell_backward_gap", back.value_gap, c.tolerances.game);
      checks.add("snell_supermartingale", back.supermartingale_violation, c.tolerances.game);
      checks.add("snell_martingale_gap", back.martingale_gap, c.tolerances.game);
      if (lat.is_full_tree() && lat.steps() <= kMaxEnumerationSteps) {
        const SnellReport en = verify_snell(lat, s, xi, p.g, SnellMode::enumerate, c.scheme,
                                            c.tolerances.game, c.seed);
        report["enumerated_value"] = en.enumerated_value;
        report["rules_checked"] = en.rules_checked;
        checks.add("snell_enumerate_gap", en.value_gap, c.tolerances.game);
        checks.add("snell_enumerate_sandwich",
                   std::max(en.supermartingale_violation, en.martingale_gap), c.tolerances.game);
      }
      break;
    }
    case ProblemKind::drbsde: {
      const DynkinGame game = p.game();
      const SeparationCheck sep = validate_game(lat, game);
      const Solution s = solve_drbsde(lat, game, c.scheme);
      save_solution(s, "solution.csv");
      report["y0"] = s.y(0, 0);
      report["separation_margin"] = sep.min_margin;
      report["solver"] = parse_ordered(metadata_json(s.meta));
      const CrossValidationReport cv =
          cross_validate(lat, game, c.schedule, c.scheme, c.tolerances.pasting, jobs);
      report["cross_validation"] = parse_ordered(cross_validation_json(cv));
      checks.require("cross_validation", cv.pass);
      break;
    }
    case ProblemKind::dynkin_verify: {
      if (!lat.is_full_tree() || lat.steps() > kMaxEnumerationSteps) {
        throw std::length_error("dynkin-verify needs a full tree with at most " +
                                std::to_string(kMaxEnumerationSteps) + " steps");
      }
      const DynkinGame game = p.game();
      PairTable table;
      GameReport oracle = game_value_oracle(lat, game, c.scheme, jobs, &table);
      const Solution s = solve_drbsde(lat, game, c.scheme);
      const GameReport saddle = verify_saddle(lat, game, s, c.scheme, 20, c.seed);
      const double tol = game_tolerance(game, c.tolerances.game);
      oracle.tau_star_hash = saddle.tau_star_hash;
      oracle.gamma_star_hash = saddle.gamma_star_hash;
      oracle.saddle_violation = saddle.saddle_violation;
      oracle.saddle_value_gap = saddle.saddle_value_gap;
      oracle.sandwich_violation = saddle.sandwich_violation;
      oracle.sampled_starts = saddle.sampled_starts;
      oracle.saddle_checked = true;
      oracle.tolerance = tol;
      checks.require("sup_inf_le_inf_sup", oracle.sup_inf <= oracle.inf_sup);
      checks.add("oracle_gap", oracle.oracle_gap, tol);
      checks.add("saddle_violation", oracle.saddle_violation, tol);
      checks.add("saddle_value_gap", oracle.saddle_value_gap, tol);
      checks.add("sandwich_violation", oracle.sandwich_violation, tol);
      oracle.pass = checks.pass;
      report["game"] = parse_ordered(game_report_json(oracle));
      write_with(dir / "pairs.csv", [&](std::ostream& o) { write_pair_table_csv(o, table); });
      break;
    }
    case ProblemKind::penalization: {
      PenalizationRun run;
      if (c.lower && c.upper) {
        run = double_penalization(lat, p.game(), c.schedule, c.direction, c.scheme);
        report["direction"] = to_string(c.direction);
      } else {
        run = penalization_run(lat, p.xi(), p.g, p.obstacle(c.side), c.side, c.schedule,
                               c.scheme);
      }
      write_with(dir / "penalization.csv",
                 [&](std::ostream& o) { write_penalization_csv(o, run.report); });
      save_solution(run.levels.back(), "solution.csv");
      report["penalization"] = penalization_json(run.report);
      penalization_checks(run.report, 1.0 + run.levels.back().y.sup_norm(), checks);
      break;
    }
    case ProblemKind::pasting: {
      const DynkinGame game = p.game();
      const PastingResult pasted = pasting_construct(lat, game, c.scheme);
      const Solution direct = solve_drbsde(lat, game, c.scheme);
      save_solution(pasted.solution, "solution.csv");
      write_with(dir / "pasting.csv",
                 [&](std::ostream& o) { write_pasting_csv(o, pasted.ledger); });
      report["y0"] = pasted.solution.y(0, 0);
      report["segments"] = pasted.ledger.segments.size();
      report["max_depth"] = pasted.ledger.max_depth;
      checks.add("direct_vs_pasting", max_abs_difference(direct.y, pasted.solution.y),
                 c.tolerances.pasting);
      checks.add("max_depth", pasted.ledger.max_depth, lat.steps() + 1);
      break;
    }
    case ProblemKind::axioms: {
      const auto cases = make_axiom_cases(lat, c.samples, c.seed);
      const AxiomReport r = verify_evaluation_axioms(lat, p.g, cases, c.scheme, c.tolerances.axioms);
      report["axioms"] = axiom_json(r);
      checks.require("axioms", r.all_pass());
      break;
    }
    case ProblemKind::hypotheses: {
      HypothesisCheckOptions opt;
      opt.sample_count = c.samples;
      opt.seed = c.seed;
      opt.box = c.box;
      const HypothesisReport r = check_hypotheses(p.g, opt);
      ordered_json verdicts = ordered_json::array();
      for (const auto& v : r.verdicts) {
        ordered_json e{{"name", v.name},
                       {"pass", v.pass},
                       {"worst_ratio", v.worst_ratio},
                       {"samples", v.samples}};
        if (v.counterexample) {
          const auto& x = *v.counterexample;
          e["counterexample"] = {{"t", x.t}, {"state", x.state}, {"y", x.y},
                                 {"y_prime", x.y_prime}, {"z", x.z}, {"z_prime", x.z_prime}};
        }
        verdicts.push_back(e);
      }
      report["hypotheses"] = verdicts;
      checks.require("hypotheses", r.all_pass());
      break;
    }
    case ProblemKind::mc_crosscheck: {
      std::optional<Solution> lattice_solution;
      if (c.lower && c.upper) {
        lattice_solution = solve_drbsde(lat, p.game(), c.scheme);
      } else if (c.lower) {
        lattice_solution = solve_rbsde(lat, p.xi(), p.g, p.obstacle(ObstacleSide::lower),
                                       ObstacleSide::lower, c.scheme);
      } else if (c.upper) {
        lattice_solution = solve_rbsde(lat, p.xi(), p.g, p.obstacle(ObstacleSide::upper),
                                       ObstacleSide::upper, c.scheme);
      } else {
        lattice_solution = solve_bsde(lat, p.xi(), p.g, c.scheme);
      }
      const PathBundle bundle =
          simulate_paths(c.mc.dim, c.horizon, c.steps, c.mc.paths, c.seed, jobs);
      McProblem mp;
      const double T = c.horizon;
      const Expression term = p.terminal;
      mp.terminal = [term, T](std::span<const double> x) { return term(T, x[0]); };
      if (p.lower) {
        const Expression e = *p.lower;
        mp.lower = [e](double t, std::span<const double> x) { return e(t, x[0]); };
      }
      if (p.upper) {
        const Expression e = *p.upper;
        mp.upper = [e](double t, std::span<const double> x) { return e(t, x[0]); };
      }
      RegressionBasis basis;
      basis.family = c.mc.basis == "polynomial" ? BasisFamily::polynomial
                                                : BasisFamily::indicator_bins;
      basis.degree = c.mc.degree;
      basis.bins = c.mc.bins;
      McOptions opt;
      opt.batches = c.mc.batches;
      opt.jobs = jobs;
      const McResult r = solve_mc(bundle, mp, p.g, basis, opt);
      const double y0_lattice = lattice_solution->y(0, 0);
      const double scale = 1.0 + lattice_solution->y.sup_norm();
      report["y0_lattice"] = y0_lattice;
      report["mc"] = parse_ordered(mc_result_json(r, bundle, basis));
      checks.require("sanity_gate", bundle.gate.pass);
      checks.add("obstacle_violations", static_cast<double>(r.obstacle_violations), 0.0);
      checks.add("y0_difference", std::abs(r.y0 - y0_lattice),
                 3.0 * r.standard_error + c.tolerances.mc_scale * scale);
      break;
    }
  }
  report["checks"] = checks.list;
  return checks.pass;
}

int error_code(const std::exception& e) {
  if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::length_error*>(&e) ||
      dynamic_cast<const std::out_of_range*>(&e) || dynamic_cast<const json::exception*>(&e)) {
    return 2;
  }
  return 1;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config_in, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentConfig config = config_in;
  if (options.seed) config.seed = *options.seed;
  RunOutcome outcome;
  outcome.out_dir = options.out ? *options.out : std::filesystem::path(config.output);

  const std::string config_text = config_to_json(config).dump();
  const std::string config_hash = hex64(fnv1a(config_text.data(), config_text.size()));
  ordered_json report;
  report["kind"] = to_string(config.kind);
  report["config_hash"] = config_hash;
  bool pass = false;
  try {
    std::filesystem::create_directories(outcome.out_dir);
    Problem p{Lattice::build(config.horizon, config.steps, config.mode),
              make_generator(config.generator), Expression::parse(config.terminal),
              std::nullopt, std::nullopt};
    if (config.lower) p.lower = Expression::parse(*config.lower);
    if (config.upper) p.upper = Expression::parse(*config.upper);
    pass = dispatch(config, p, outcome.out_dir, std::max(1, options.jobs), report);
    outcome.exit_code = pass ? 0 : 1;
    outcome.message = pass ? "pass" : "verification failed";
  } catch (const std::exception& e) {
    outcome.exit_code = error_code(e);
    outcome.message = e.what();
    report["error"] = e.what();
  }
  report["pass"] = pass;

  try {
    std::filesystem::create_directories(outcome.out_dir);
    write_file(outcome.out_dir / "report.json", report.dump(2) + "\n");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ordered_json manifest;
    manifest["version"] = kVersion;
    manifest["config_hash"] = config_hash;
    manifest["config"] = config_to_json(config);
    manifest["exit_code"] = outcome.exit_code;
    manifest["wall_time_seconds"] = wall;
    write_file(outcome.out_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    if (outcome.exit_code == 0) outcome.exit_code = 1;
    outcome.message = e.what();
  }
  return outcome;
}

RunOutcome run_config_file(const std::filesystem::path& path, const RunOptions& options) {
  ExperimentConfig config;
  try {
    config = load_config(path);
  } catch (const std::exception& e) {
    RunOutcome out;
    out.exit_code = 2;
    out.message = e.what();
    out.out_dir = options.out ? *options.out : std::filesystem::path();
    return out;
  }
  return run_experiment(config, options);
}

std::vector<SuiteRow> verify_all(const std::filesystem::path& dir,
                                 const std::filesystem::path& out, int jobs) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SuiteRow> rows;
  for (const auto& f : files) {
    RunOptions opt;
    opt.out = out / f.stem();
    opt.jobs = jobs;
    SuiteRow row;
    row.name = f.stem().string();
    try {
      row.kind = to_string(load_config(f).kind);
    } catch (const std::exception&) {
      row.kind = "?";
    }
    const RunOutcome r = run_config_file(f, opt);
    row.exit_code = r.exit_code;
    row.message = r.message;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace drbsde
