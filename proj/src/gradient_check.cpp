#include "tvp/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tvp/error.hpp"

namespace tvp {

GradientCheckResult gradient_check(Model<double>& model, const SequenceBatch& batch, double epsilon,
                                   int min_coordinates, std::uint64_t seed) {
  model.zero_grad();
  model.forward_backward(batch);

  struct Entry {
    std::string group;
    nn::Tensor<double>* tensor;
  };
  std::vector<Entry> tensors;
  std::size_t total = 0;
  model.for_each_param([&](const std::string&, ParamGroup g, nn::Tensor<double>& t) {
    if (t.value.size() == 0) return;
    if (!t.grad.allFinite()) throw Error(ErrorCode::non_finite, "analytic gradient is not finite");
    tensors.push_back({std::string(to_string(g)), &t});
    total += static_cast<std::size_t>(t.value.size());
  });

  // Proportional share per tensor, at least one coordinate each.
  std::mt19937_64 rng(seed);
  std::vector<std::pair<nn::Tensor<double>*, Eigen::Index>> coords;
  std::vector<std::string> coord_groups;
  for (const auto& e : tensors) {
    const auto size = e.tensor->value.size();
    const auto share = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::ceil(static_cast<double>(min_coordinates) * size / total)));
    for (Eigen::Index k = 0; k < std::min(share, size); ++k) {
      coords.emplace_back(e.tensor, static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(size)));
      coord_groups.push_back(e.group);
    }
  }

  GradientCheckResult result;
  const auto loss_at = [&] { return compute_loss(model.forward(batch), batch); };
  for (std::size_t i = 0; i < coords.size(); ++i) {
    auto [t, idx] = coords[i];
    double& w = t->value.data()[idx];
    const double saved = w;
    w = saved + epsilon;
    const double plus = loss_at();
    w = saved - epsilon;
    const double minus = loss_at();
    w = saved;
    const double numeric = (plus - minus) / (2.0 * epsilon);
    const double analytic = t->grad.data()[idx];
    if (!std::isfinite(numeric)) throw Error(ErrorCode::non_finite, "numeric gradient is not finite");
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-8);
    result.max_relative_error = std::max(result.max_relative_error, rel);
    auto& g = result.max_error_by_group[coord_groups[i]];
    g = std::max(g, rel);
    ++result.coordinates_by_group[coord_groups[i]];
  }
  result.coordinates = static_cast<int>(coords.size());
  return result;
}

}  // namespace tvp
