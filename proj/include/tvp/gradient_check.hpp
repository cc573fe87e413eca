#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "tvp/model.hpp"

namespace tvp {

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int coordinates = 0;
  std::map<std::string, double> max_error_by_group;
  std::map<std::string, int> coordinates_by_group;
};

// Compares analytic gradients of compute_loss with central finite differences on a random subset
// of coordinates. Every parameter tensor contributes at least one coordinate. Relative error is
// |g_a - g_n| / max(|g_a| + |g_n|, 1e-8). Throws non_finite on NaN/inf gradients.
GradientCheckResult gradient_check(Model<double>& model, const SequenceBatch& batch, double epsilon,
                                   int min_coordinates = 200, std::uint64_t seed = 0);

}  // namespace tvp
