#include "drbsde/mc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>
#include <json.hpp>

#include "drbsde/io.hpp"
#include "drbsde/rbsde.hpp"

namespace drbsde {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Runs body(begin, end) over [0, count) in fixed blocks; block boundaries do
// not depend on the worker count.
template <class Body>
void for_blocks(std::size_t count, std::size_t block, int jobs, Body&& body) {
  const std::size_t blocks = (count + block - 1) / block;
  const std::size_t workers = std::clamp<std::size_t>(jobs > 0 ? jobs : 1, 1, std::max<std::size_t>(blocks, 1));
  auto run = [&](std::size_t w) {
    for (std::size_t b = w; b < blocks; b += workers) {
      body(b, b * block, std::min(count, (b + 1) * block));
    }
  };
  if (workers == 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  for (auto& t : pool) t.join();
}

constexpr std::size_t kBlock = 4096;

}  // namespace

PathBundle simulate_paths(int dim, double horizon, int steps, std::size_t paths,
                          std::uint64_t seed, int jobs) {
  if (dim < 1) throw std::invalid_argument("dimension must be at least 1");
  if (steps < 1) throw std::invalid_argument("need at least one time step");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("horizon must be positive and finite");
  }
  if (paths < 100) throw std::invalid_argument("need at least 100 paths");
  const double entries = static_cast<double>(paths) * steps * dim;
  if (entries > static_cast<double>(kMaxMcEntries)) {
    throw std::length_error("path bundle of " + format_real(entries) + " increments is too large");
  }

  PathBundle b;
  b.dim = dim;
  b.horizon = horizon;
  b.steps = steps;
  b.paths = paths;
  b.seed = seed;
  const std::size_t per_path = static_cast<std::size_t>(steps) * dim;
  b.increments.resize(paths * per_path);
  b.states.resize(paths * (steps + 1) * dim);
  const double sd = std::sqrt(horizon / steps);

  for_blocks(paths, kBlock, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(m)));
      std::normal_distribution<double> normal(0.0, sd);
      double* inc = b.increments.data() + m * per_path;
      double* x = b.states.data() + m * (steps + 1) * dim;
      for (int c = 0; c < dim; ++c) x[c] = 0.0;
      for (int k = 0; k < steps; ++k) {
        for (int c = 0; c < dim; ++c) {
          inc[k * dim + c] = normal(rng);
          x[(k + 1) * dim + c] = x[k * dim + c] + inc[k * dim + c];
        }
      }
    }
  });

  SanityGate& gate = b.gate;
  const double count = static_cast<double>(paths) * steps;
  gate.mean.assign(dim, 0.0);
  gate.variance.assign(dim, 0.0);
  gate.mean_bound = 3.0 / std::sqrt(static_cast<double>(paths));
  std::vector<double> cross(dim * dim, 0.0);
  for (std::size_t e = 0; e < paths * steps; ++e) {
    const double* u = b.increments.data() + e * dim;
    for (int c = 0; c < dim; ++c) {
      gate.mean[c] += u[c] / sd;
      gate.variance[c] += (u[c] / sd) * (u[c] / sd);
      for (int c2 = c + 1; c2 < dim; ++c2) cross[c * dim + c2] += u[c] * u[c2] / (sd * sd);
    }
  }
  gate.pass = true;
  for (int c = 0; c < dim; ++c) {
    gate.mean[c] /= count;
    gate.variance[c] = gate.variance[c] / count - gate.mean[c] * gate.mean[c];
    if (std::abs(gate.mean[c]) > gate.mean_bound) gate.pass = false;
    if (std::abs(gate.variance[c] - 1.0) > 0.1) gate.pass = false;
    for (int c2 = c + 1; c2 < dim; ++c2) {
      gate.max_cross_correlation =
          std::max(gate.max_cross_correlation, std::abs(cross[c * dim + c2] / count));
    }
  }
  if (gate.max_cross_correlation > gate.mean_bound) gate.pass = false;
  return b;
}

std::size_t RegressionBasis::size(int dim) const {
  if (family == BasisFamily::indicator_bins) return static_cast<std::size_t>(bins);
  // C(degree + dim, dim)
  std::size_t n = 1;
  for (int i = 1; i <= dim; ++i) n = n * (degree + i) / i;
  return n;
}

namespace {

double hermite(int j, double u) {
  double prev = 1.0, cur = u;
  if (j == 0) return prev;
  for (int n = 1; n < j; ++n) {
    const double next = u * cur - n * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

void multi_indices(int dim, std::vector<int>& cur, int left,
                   std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == dim) {
    out.push_back(cur);
    return;
  }
  for (int j = 0; j <= left; ++j) {
    cur.push_back(j);
    multi_indices(dim, cur, left - j, out);
    cur.pop_back();
  }
}

}  // namespace

void RegressionBasis::evaluate(std::span<const double> u, std::span<double> out) const {
  const int dim = static_cast<int>(u.size());
  if (out.size() != size(dim)) throw std::invalid_argument("basis output has the wrong size");
  if (family == BasisFamily::indicator_bins) {
    std::fill(out.begin(), out.end(), 0.0);
    const double w = 6.0 / bins;
    const int b = std::clamp(static_cast<int>(std::floor((u[0] + 3.0) / w)), 0, bins - 1);
    out[b] = 1.0;
    return;
  }
  thread_local int cached_dim = -1, cached_degree = -1;
  thread_local std::vector<std::vector<int>> idx;
  thread_local std::vector<double> he;
  if (cached_dim != dim || cached_degree != degree) {
    std::vector<int> cur;
    idx.clear();
    multi_indices(dim, cur, degree, idx);
    he.assign((degree + 1) * dim, 0.0);
    cached_dim = dim;
    cached_degree = degree;
  }
  for (int c = 0; c < dim; ++c) {
    for (int j = 0; j <= degree; ++j) he[c * (degree + 1) + j] = hermite(j, u[c]);
  }
  for (std::size_t r = 0; r < idx.size(); ++r) {
    double v = 1.0;
    for (int c = 0; c < dim; ++c) v *= he[c * (degree + 1) + idx[r][c]];
    out[r] = v;
  }
}

std::string RegressionBasis::describe() const {
  if (family == BasisFamily::indicator_bins) return "indicator-bins:" + std::to_string(bins);
  return "polynomial:" + std::to_string(degree);
}

namespace {

struct PassOutput {
  double y0 = 0.0;
  bool singular = false;
};

// Backward recursion over the paths [first, first + count). Fills the
// diagnostics of `res` when `diagnostics` is set; otherwise a singular
// regression is reported instead of thrown.
PassOutput backward_pass(const PathBundle& paths, std::size_t first, std::size_t count,
                         const McProblem& problem, const Generator& g,
                         const RegressionBasis& basis, int jobs, McResult* diagnostics) {
  const int n = paths.steps;
  const int dim = paths.dim;
  const double dt = paths.dt();
  const std::size_t p = basis.size(dim);

  std::vector<double> y(count);
  std::vector<double> flat_lo(count, 0.0), flat_hi(count, 0.0);
  std::size_t violations = 0;
  for (std::size_t j = 0; j < count; ++j) y[j] = problem.terminal(paths.state(first + j, n));

  // Reflection (or penalty) of a candidate; returns the increments too.
  auto reflect = [&](double t, std::span<const double> x, double a, double& dk, double& dj) {
    double v = a;
    dk = dj = 0.0;
    if (problem.lower) {
      const double l = problem.lower(t, x);
      const double r = problem.penalty ? penalized_value(v, l, dt, *problem.penalty, ObstacleSide::lower)
                                       : std::max(l, v);
      dk = r - v;
      v = r;
    }
    if (problem.upper) {
      const double u = problem.upper(t, x);
      const double r = problem.penalty ? penalized_value(v, u, dt, *problem.penalty, ObstacleSide::upper)
                                       : std::min(u, v);
      dj = v - r;
      v = r;
    }
    return v;
  };
  auto check = [&](double t, std::span<const double> x, double v) {
    if (problem.penalty) return;
    if ((problem.lower && v < problem.lower(t, x)) || (problem.upper && v > problem.upper(t, x))) {
      ++violations;
    }
  };

  std::vector<double> next(count);
  for (int k = n - 1; k >= 1; --k) {
    const double t = k * dt;
    const double scale = 1.0 / std::sqrt(t);
    const std::size_t blocks = (count + kBlock - 1) / kBlock;
    std::vector<Eigen::MatrixXd> gram(blocks, Eigen::MatrixXd::Zero(p, p));
    std::vector<Eigen::VectorXd> rhs_y(blocks, Eigen::VectorXd::Zero(p));
    std::vector<Eigen::VectorXd> rhs_z(blocks, Eigen::VectorXd::Zero(p));
    for_blocks(count, kBlock, jobs, [&](std::size_t b, std::size_t begin, std::size_t end) {
      std::vector<double> u(dim);
      Eigen::VectorXd phi(p);
      for (std::size_t j = begin; j < end; ++j) {
        const auto x = paths.state(first + j, k);
        for (int c = 0; c < dim; ++c) u[c] = x[c] * scale;
        basis.evaluate(u, std::span<double>(phi.data(), p));
        gram[b].selfadjointView<Eigen::Lower>().rankUpdate(phi);
        rhs_y[b] += phi * y[j];
        rhs_z[b] += phi * (y[j] * paths.increment(first + j, k, 0));
      }
    });
    Eigen::MatrixXd gsum = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd by = Eigen::VectorXd::Zero(p), bz = Eigen::VectorXd::Zero(p);
    for (std::size_t b = 0; b < blocks; ++b) {
      gsum += gram[b];
      by += rhs_y[b];
      bz += rhs_z[b];
    }
    gsum = gsum.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gsum, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const double cond = lo > 0.0 ? std::sqrt(hi / lo) : INFINITY;
    if (diagnostics && cond > diagnostics->max_condition) {
      diagnostics->max_condition = cond;
      diagnostics->worst_condition_step = k;
    }
    if (!std::isfinite(cond) || cond > 1e12) {
      if (!diagnostics) return PassOutput{0.0, true};
      throw std::runtime_error("singular regression at step " + std::to_string(k) + " with basis " +
                               basis.describe() + ": condition number " + format_real(cond) +
                               ", smallest Gram eigenvalue " + format_real(lo));
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gsum);
    const Eigen::VectorXd beta_y = ldlt.solve(by);
    const Eigen::VectorXd beta_z = ldlt.solve(bz);

    for_blocks(count, kBlock, jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
      std::vector<double> u(dim);
      Eigen::VectorXd phi(p);
      for (std::size_t j = begin; j < end; ++j) {
        const auto x = paths.state(first + j, k);
        for (int c = 0; c < dim; ++c) u[c] = x[c] * scale;
        basis.evaluate(u, std::span<double>(phi.data(), p));
        const double e = phi.dot(beta_y);
        const double z = phi.dot(beta_z) / dt;
        const double a = e + dt * g(Node{-1, 0, t, x[0]}, e, z);
        double dk, dj;
        const double v = reflect(t, x, a, dk, dj);
        if (problem.lower) flat_lo[j] += std::abs(v - problem.lower(t, x)) * dk;
        if (problem.upper) flat_hi[j] += std::abs(problem.upper(t, x) - v) * dj;
        next[j] = v;
      }
    });
    for (std::size_t j = 0; j < count; ++j) check(t, paths.state(first + j, k), next[j]);
    y.swap(next);
  }

  // Root step: every path starts at the origin, so plain sample means.
  const auto origin = paths.state(0, 0);
  double sy = 0.0, sz = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    sy += y[j];
    sz += y[j] * paths.increment(first + j, 0, 0);
  }
  const double e = sy / count;
  const double z = sz / count / dt;
  double dk0, dj0;
  const double y0 = reflect(0.0, origin, e + dt * g(Node{-1, 0, 0.0, 0.0}, e, z), dk0, dj0);
  if (diagnostics) {
    check(0.0, origin, y0);
    const double lo0 = problem.lower ? std::abs(y0 - problem.lower(0.0, origin)) * dk0 : 0.0;
    const double hi0 = problem.upper ? std::abs(problem.upper(0.0, origin) - y0) * dj0 : 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      diagnostics->flat_off_lower = std::max(diagnostics->flat_off_lower, flat_lo[j] + lo0);
      diagnostics->flat_off_upper = std::max(diagnostics->flat_off_upper, flat_hi[j] + hi0);
    }
    diagnostics->obstacle_violations = violations;
  }
  return PassOutput{y0, false};
}

}  // namespace

McResult solve_mc(const PathBundle& paths, const McProblem& problem, const Generator& g,
                  const RegressionBasis& basis, const McOptions& options) {
  if (!problem.terminal) throw std::invalid_argument("Monte Carlo problem needs a terminal payoff");
  if (basis.family == BasisFamily::polynomial && basis.degree < 0) {
    throw std::invalid_argument("polynomial degree must be nonnegative");
  }
  if (basis.family == BasisFamily::indicator_bins && basis.bins < 1) {
    throw std::invalid_argument("need at least one bin");
  }
  McResult res;
  res.y0 = backward_pass(paths, 0, paths.paths, problem, g, basis, options.jobs, &res).y0;

  // Batch means: the whole recursion rerun on disjoint groups of paths.
  const std::size_t min_batch = std::max<std::size_t>(100, 10 * basis.size(paths.dim));
  const std::size_t batches = std::min(options.batches, paths.paths / min_batch);
  if (batches >= 2) {
    const std::size_t per = paths.paths / batches;
    std::vector<double> values;
    for (std::size_t b = 0; b < batches; ++b) {
      const PassOutput out =
          backward_pass(paths, b * per, per, problem, g, basis, options.jobs, nullptr);
      if (out.singular) {
        res.warnings.push_back("batch " + std::to_string(b) + " has a singular regression");
        continue;
      }
      values.push_back(out.y0);
    }
    if (values.size() >= 2) {
      const double reps = static_cast<double>(values.size());
      double mean = 0.0;
      for (double v : values) mean += v / reps;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      res.standard_error = std::sqrt(ss / (reps - 1.0) / reps);
    } else {
      res.standard_error = INFINITY;
    }
  } else if (options.batches >= 2) {
    res.standard_error = INFINITY;
    res.warnings.push_back("too few paths for batch standard errors");
  }
  if (res.max_condition > options.condition_warning) {
    res.warnings.push_back("regression condition number " + format_real(res.max_condition) +
                           " at step " + std::to_string(res.worst_condition_step));
  }
  if (!paths.gate.pass) res.warnings.push_back("path bundle failed the sanity gate");
  return res;
}

void write_bundle_csv(std::ostream& out, const PathBundle& b) {
  out << "path,k,coordinate,increment,state\n";
  for (std::size_t m = 0; m < b.paths; ++m) {
    for (int k = 0; k <= b.steps; ++k) {
      const auto x = b.state(m, k);
      for (int c = 0; c < b.dim; ++c) {
        out << m << ',' << k << ',' << c << ','
            << (k < b.steps ? format_real(b.increment(m, k, c)) : std::string()) << ','
            << format_real(x[c]) << '\n';
      }
    }
  }
}

std::string mc_result_json(const McResult& r, const PathBundle& paths,
                           const RegressionBasis& basis) {
  nlohmann::ordered_json j;
  j["y0"] = r.y0;
  j["standard_error"] = r.standard_error;
  j["max_condition"] = r.max_condition;
  j["worst_condition_step"] = r.worst_condition_step;
  j["flat_off"] = {{"lower", r.flat_off_lower}, {"upper", r.flat_off_upper}};
  j["obstacle_violations"] = r.obstacle_violations;
  j["warnings"] = r.warnings;
  j["seed"] = paths.seed;
  j["paths"] = paths.paths;
  j["steps"] = paths.steps;
  j["dim"] = paths.dim;
  j["basis"] = basis.describe();
  j["sanity_gate"] = {{"mean", paths.gate.mean},
                      {"variance", paths.gate.variance},
                      {"max_cross_correlation", paths.gate.max_cross_correlation},
                      {"mean_bound", paths.gate.mean_bound},
                      {"pass", paths.gate.pass}};
  return j.dump(2);
}

}  // namespace drbsde
