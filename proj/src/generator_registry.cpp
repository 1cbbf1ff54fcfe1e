#include "drbsde/generator_registry.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace drbsde {

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expected,
                                  const std::string& name) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("generator '" + name + "': cannot parse number '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw std::invalid_argument("generator '" + name + "' expects " + std::to_string(expected) +
                                " parameter(s)");
  }
  return out;
}

// Index of the cell containing x and the weight of its right end, clamped.
std::pair<std::size_t, double> locate(const std::vector<double>& grid, double x) {
  if (grid.size() == 1 || x <= grid.front()) return {0, 0.0};
  if (x >= grid.back()) return {grid.size() - 2, 1.0};
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
  return {i, (x - grid[i]) / (grid[i + 1] - grid[i])};
}

}  // namespace

double DriverTable::operator()(double tq, double sq, double yq, double zq) const {
  const std::array<const std::vector<double>*, 4> axes{&t, &state, &y, &z};
  const std::array<double, 4> q{tq, sq, yq, zq};
  std::array<std::size_t, 4> base{};
  std::array<double, 4> w{};
  for (std::size_t a = 0; a < 4; ++a) std::tie(base[a], w[a]) = locate(*axes[a], q[a]);

  double acc = 0.0;
  for (unsigned corner = 0; corner < 16; ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      const bool hi = (corner >> (3 - a)) & 1U;
      const std::size_t n = axes[a]->size();
      std::size_t idx = base[a] + (hi ? 1 : 0);
      if (n == 1) {
        if (hi) weight = 0.0;
        idx = 0;
      } else {
        weight *= hi ? w[a] : 1.0 - w[a];
      }
      flat = flat * n + idx;
    }
    if (weight != 0.0) acc += weight * values[flat];
  }
  return acc;
}

DriverTable load_driver_table(const std::string& path, GeneratorConstants* constants, double* h) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open driver file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("driver file '" + path + "': " + e.what());
  }
  DriverTable table;
  try {
    table.t = j.at("t").get<std::vector<double>>();
    table.state = j.at("state").get<std::vector<double>>();
    table.y = j.at("y").get<std::vector<double>>();
    table.z = j.at("z").get<std::vector<double>>();
    table.values = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("driver file '" + path + "': " + e.what());
  }
  for (const auto* axis : {&table.t, &table.state, &table.y, &table.z}) {
    if (axis->empty() || !std::is_sorted(axis->begin(), axis->end()) ||
        std::adjacent_find(axis->begin(), axis->end()) != axis->end()) {
      throw std::invalid_argument("driver file '" + path +
                                  "': every axis must be nonempty and strictly increasing");
    }
  }
  if (table.values.size() != table.t.size() * table.state.size() * table.y.size() * table.z.size()) {
    throw std::invalid_argument("driver file '" + path + "': values do not match the grid size");
  }
  if (constants) {
    constants->kappa = j.value("kappa", constants->kappa);
    constants->lambda = j.value("lambda", constants->lambda);
    constants->alpha = j.value("alpha", constants->alpha);
  }
  if (h) *h = j.value("h", *h);
  return table;
}

Generator make_generator(const GeneratorSpec& spec) {
  const std::string& name = spec.name;
  const auto colon = name.find(':');
  const std::string head = name.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : name.substr(colon + 1);

  Generator base;
  if (head == "zero") {
    base = zero_generator();
  } else if (head == "constant") {
    base = constant_generator(parse_numbers(args, 1, name)[0]);
  } else if (head == "linear") {
    const auto p = parse_numbers(args, 2, name);
    base = linear_generator(p[0], p[1]);
  } else if (head == "sine") {
    const auto p = parse_numbers(args, 2, name);
    base = sine_generator(p[0], p[1]);
  } else if (head == "abs-z") {
    base = abs_z_generator(parse_numbers(args, 1, name)[0]);
  } else if (head == "driver-file") {
    if (args.empty()) throw std::invalid_argument("driver-file needs a path");
    GeneratorConstants c;
    double h = 0.0;
    auto table = std::make_shared<const DriverTable>(load_driver_table(args, &c, &h));
    base = Generator(
        [table](const Node& x, double y, double z) { return (*table)(x.t, x.state, y, z); }, c,
        [h](const Node&) { return h; }, GeneratorTraits{}, name);
  } else {
    throw std::invalid_argument("unknown generator '" + name + "'");
  }

  if (!spec.kappa && !spec.lambda && !spec.alpha && !spec.h) return base;
  GeneratorConstants c = base.constants();
  if (spec.kappa) c.kappa = *spec.kappa;
  if (spec.lambda) c.lambda = *spec.lambda;
  if (spec.alpha) c.alpha = *spec.alpha;
  Generator::Bound bound = [base](const Node& x) { return base.h(x); };
  if (spec.h) {
    const double h = *spec.h;
    bound = [h](const Node&) { return h; };
  }
  return Generator([base](const Node& x, double y, double z) { return base(x, y, z); }, c, bound,
                   base.traits(), base.name());
}

}  // namespace drbsde
