#include "drbsde/dynkin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "drbsde/io.hpp"

namespace drbsde {

namespace {

void require_tree(const Lattice& lattice, const char* what) {
  if (!lattice.is_full_tree()) {
    throw std::invalid_argument(std::string(what) + " needs a full-tree lattice");
  }
}

// R at a node where tau ^ gamma stops, given which of the two flag it.
double node_payoff(const DynkinGame& game, int k, std::size_t i, int steps, bool tau_flag,
                   bool gamma_flag) {
  if (k == steps) return game.xi[i];
  if (gamma_flag) return game.upper(k, i);
  if (tau_flag) return game.lower(k, i);
  return 0.0;
}

void fill_payoff(const Lattice& lat, const DynkinGame& game, std::span<const std::uint8_t> tau,
                 std::span<const std::uint8_t> gamma, std::span<std::uint8_t> both,
                 std::span<double> values) {
  const int n = lat.steps();
  for (int k = 0; k <= n; ++k) {
    const std::size_t off = lat.offset(k);
    for (std::size_t i = 0; i < lat.nodes_at(k); ++i) {
      const std::size_t id = off + i;
      both[id] = tau[id] | gamma[id];
      values[id] = both[id] ? node_payoff(game, k, i, n, tau[id], gamma[id]) : 0.0;
    }
  }
}

}  // namespace

double payoff_R(const StoppingRule& tau, const StoppingRule& gamma, std::uint64_t path,
                const DynkinGame& game) {
  const Lattice& lat = tau.lattice();
  if (!(gamma.lattice() == lat)) throw std::invalid_argument("rules live on different lattices");
  require_tree(lat, "payoff_R");
  for (int k = 0; k <= lat.steps(); ++k) {
    const std::size_t i = node_on_path(lat, path, k);
    const bool t = tau.stops(k, i);
    const bool g = gamma.stops(k, i);
    if (t || g) return node_payoff(game, k, i, lat.steps(), t, g);
  }
  throw std::logic_error("path never stopped");
}

AdaptedProcess payoff_process(const StoppingRule& tau, const StoppingRule& gamma,
                              const DynkinGame& game) {
  const Lattice& lat = tau.lattice();
  AdaptedProcess out(lat);
  std::vector<std::uint8_t> both(lat.node_count());
  fill_payoff(lat, game, tau.flags(), gamma.flags(), both, out.values());
  return out;
}

double strategy_value(const Lattice& lattice, const DynkinGame& game, const StoppingRule& tau,
                      const StoppingRule& gamma, Scheme scheme) {
  require_tree(lattice, "strategy_value");
  if (!(tau.lattice() == lattice) || !(gamma.lattice() == lattice)) {
    throw std::invalid_argument("rules live on a different lattice");
  }
  std::vector<std::uint8_t> both(lattice.node_count());
  std::vector<double> values(lattice.node_count());
  fill_payoff(lattice, game, tau.flags(), gamma.flags(), both, values);
  StoppedEvaluator eval(lattice, game.g, scheme);
  eval.evaluate(both, values);
  return values[0];
}

double game_tolerance(const DynkinGame& game, double base) {
  const double scale = std::max(game.lower.sup_norm(), game.upper.sup_norm());
  return base * std::max(1.0, scale / 1e3);
}

GameReport game_value_oracle(const Lattice& lattice, const DynkinGame& game, Scheme scheme,
                             int jobs, PairTable* table) {
  require_tree(lattice, "game_value_oracle");
  const Solution direct = solve_drbsde(lattice, game, scheme);
  const auto rules = enumerate_stopping_rules(lattice);
  const std::size_t r = rules.size();
  std::vector<double> values(r * r);

  auto fill_rows = [&](std::size_t begin, std::size_t end) {
    StoppedEvaluator eval(lattice, game.g, scheme);
    std::vector<std::uint8_t> both(lattice.node_count());
    std::vector<double> buf(lattice.node_count());
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t g = 0; g < r; ++g) {
        fill_payoff(lattice, game, rules[t].flags(), rules[g].flags(), both, buf);
        eval.evaluate(both, buf);
        values[t * r + g] = buf[0];
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs > 0 ? jobs : 1, 1, r);
  if (workers == 1) {
    fill_rows(0, r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back(fill_rows, r * w / workers, r * (w + 1) / workers);
    }
    for (auto& t : pool) t.join();
  }

  GameReport rep;
  rep.tolerance = game_tolerance(game);
  rep.y0 = direct.y(0, 0);
  rep.rule_count = r;
  rep.sup_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < r; ++t) {
    double row_min = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < r; ++g) row_min = std::min(row_min, values[t * r + g]);
    if (row_min > rep.sup_inf) {
      rep.sup_inf = row_min;
      rep.tau_hat = t;
    }
  }
  rep.inf_sup = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < r; ++g) {
    double col_max = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < r; ++t) col_max = std::max(col_max, values[t * r + g]);
    if (col_max < rep.inf_sup) {
      rep.inf_sup = col_max;
      rep.gamma_hat = g;
    }
  }
  rep.tau_hat_hash = rules[rep.tau_hat].hash();
  rep.gamma_hat_hash = rules[rep.gamma_hat].hash();
  rep.oracle_gap = std::max(std::abs(rep.sup_inf - rep.y0), std::abs(rep.inf_sup - rep.y0));
  rep.oracle_checked = true;
  rep.pass = rep.sup_inf <= rep.inf_sup && rep.oracle_gap <= rep.tolerance;
  if (table) {
    table->rules = r;
    table->values = std::move(values);
  }
  return rep;
}

GameReport verify_saddle(const Lattice& lattice, const DynkinGame& game, const Solution& solution,
                         Scheme scheme, std::size_t samples, std::uint64_t seed) {
  require_tree(lattice, "verify_saddle");
  if (!(solution.lattice() == lattice) || !solution.lower || !solution.upper) {
    throw std::invalid_argument("saddle check needs a doubly reflected solution on this lattice");
  }
  const auto rules = enumerate_stopping_rules(lattice);
  const StoppingRule root = StoppingRule::at_step(lattice, 0);
  const StoppingRule tau_star = first_hitting(solution, root, ObstacleSide::lower, 0.0);
  const StoppingRule gamma_star = first_hitting(solution, root, ObstacleSide::upper, 0.0);

  GameReport rep;
  rep.tolerance = game_tolerance(game);
  rep.y0 = solution.y(0, 0);
  rep.rule_count = rules.size();
  rep.tau_star_hash = tau_star.hash();
  rep.gamma_star_hash = gamma_star.hash();

  StoppedEvaluator eval(lattice, game.g, scheme);
  std::vector<std::uint8_t> both(lattice.node_count());
  std::vector<double> buf(lattice.node_count());
  auto value = [&](const StoppingRule& tau, const StoppingRule& gamma) {
    fill_payoff(lattice, game, tau.flags(), gamma.flags(), both, buf);
    eval.evaluate(both, buf);
    return buf;
  };

  for (const auto& rule : rules) {
    rep.saddle_violation =
        std::max(rep.saddle_violation, value(rule, gamma_star)[0] - rep.y0);
    rep.saddle_violation =
        std::max(rep.saddle_violation, rep.y0 - value(tau_star, rule)[0]);
  }
  rep.saddle_value_gap = std::abs(value(tau_star, gamma_star)[0] - rep.y0);

  // Sandwich at random starting rules nu against deviations stopping after nu.
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.3);
  const auto y = solution.y.values();
  for (std::size_t s = 0; s < samples; ++s) {
    const StoppingRule nu =
        StoppingRule::from_predicate(lattice, [&](const Node&) { return coin(rng); }).canonical();
    const auto phase = stop_phase(nu);
    const auto live = nu.reachable_unstopped();
    const StoppingRule t_star = first_hitting(solution, nu, ObstacleSide::lower, 0.0);
    const StoppingRule g_star = first_hitting(solution, nu, ObstacleSide::upper, 0.0);
    for (int d = 0; d < 5; ++d) {
      StoppingRule dev(lattice);
      for (int k = 0; k < lattice.steps(); ++k) {
        for (std::size_t i = 0; i < lattice.nodes_at(k); ++i) {
          if (phase[lattice.offset(k) + i] == StopPhase::at_or_after && coin(rng)) {
            dev.set(k, i, true);
          }
        }
      }
      const auto above = value(dev, g_star);
      const auto below = value(t_star, dev);
      for (std::size_t id = 0; id < y.size(); ++id) {
        if (!live[id] || !nu.flags()[id]) continue;
        rep.sandwich_violation = std::max(rep.sandwich_violation, above[id] - y[id]);
        rep.sandwich_violation = std::max(rep.sandwich_violation, y[id] - below[id]);
      }
    }
    ++rep.sampled_starts;
  }
  rep.saddle_checked = true;
  rep.pass = rep.saddle_violation <= rep.tolerance && rep.saddle_value_gap <= rep.tolerance &&
             rep.sandwich_violation <= rep.tolerance;
  return rep;
}

GameReport verify_game(const Lattice& lattice, const DynkinGame& game, Scheme scheme, int jobs) {
  GameReport rep = game_value_oracle(lattice, game, scheme, jobs);
  const Solution direct = solve_drbsde(lattice, game, scheme);
  const GameReport saddle = verify_saddle(lattice, game, direct, scheme);
  rep.tau_star_hash = saddle.tau_star_hash;
  rep.gamma_star_hash = saddle.gamma_star_hash;
  rep.saddle_violation = saddle.saddle_violation;
  rep.saddle_value_gap = saddle.saddle_value_gap;
  rep.sandwich_violation = saddle.sandwich_violation;
  rep.sampled_starts = saddle.sampled_starts;
  rep.saddle_checked = true;
  rep.pass = rep.pass && saddle.pass;
  return rep;
}

std::string game_report_json(const GameReport& r) {
  nlohmann::ordered_json j;
  j["y0"] = r.y0;
  if (r.oracle_checked) {
    j["sup_inf"] = r.sup_inf;
    j["inf_sup"] = r.inf_sup;
    j["oracle_gap"] = r.oracle_gap;
    j["tau_hat"] = {{"index", r.tau_hat}, {"hash", hex64(r.tau_hat_hash)}};
    j["gamma_hat"] = {{"index", r.gamma_hat}, {"hash", hex64(r.gamma_hat_hash)}};
  }
  j["rule_count"] = r.rule_count;
  if (r.saddle_checked) {
    j["tau_star"] = hex64(r.tau_star_hash);
    j["gamma_star"] = hex64(r.gamma_star_hash);
    j["saddle_violation"] = r.saddle_violation;
    j["saddle_value_gap"] = r.saddle_value_gap;
    j["sandwich_violation"] = r.sandwich_violation;
    j["sampled_starts"] = r.sampled_starts;
  }
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  return j.dump(2);
}

void write_pair_table_csv(std::ostream& out, const PairTable& table) {
  out << "tau,gamma,value\n";
  for (std::size_t t = 0; t < table.rules; ++t) {
    for (std::size_t g = 0; g < table.rules; ++g) {
      out << t << ',' << g << ',' << format_real(table.values[t * table.rules + g]) << '\n';
    }
  }
}

}  // namespace drbsde
