#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drbsde/generator.hpp"

namespace drbsde {

/// Named driver plus optional overrides of its declared constants.
///
/// Recognised names:
///   zero
///   constant:c          g = c
///   linear:a,b          g = a y + b z
///   sine:a,b            g = a y + b sin(z)
///   abs-z:k             g = k |z|
///   driver-file:PATH    tabulated g, see load_driver_table
struct GeneratorSpec {
  std::string name = "zero";
  std::optional<double> kappa;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<double> h;

  bool operator==(const GeneratorSpec&) const = default;
};

Generator make_generator(const GeneratorSpec& spec);

/// Driver tabulated on a rectilinear (t, state, y, z) grid. Values are stored
/// row-major with z varying fastest. Queries outside the grid are clamped to
/// its boundary.
struct DriverTable {
  std::vector<double> t, state, y, z;
  std::vector<double> values;

  double operator()(double t, double state, double y, double z) const;
};

/// JSON object {"t": [...], "state": [...], "y": [...], "z": [...],
/// "values": [...]} with optional "kappa", "lambda", "alpha", "h".
DriverTable load_driver_table(const std::string& path, GeneratorConstants* constants = nullptr,
                              double* h = nullptr);

}  // namespace drbsde
