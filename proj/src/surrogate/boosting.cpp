#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "looptune/surrogate.hpp"

namespace looptune {

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(q * n)) - 1;
  rank = std::clamp<std::ptrdiff_t>(rank, 0, static_cast<std::ptrdiff_t>(values.size()) - 1);
  return values[static_cast<std::size_t>(rank)];
}

QuantileBoostedModel::QuantileBoostedModel(const TrainingSet& data, double quantile,
                                           const BoostingParams& params)
    : quantile_(quantile), learning_rate_(params.learning_rate) {
  const std::size_t n = data.inputs.size();
  init_ = empirical_quantile(data.targets, quantile);
  std::vector<double> current(n, init_);
  std::vector<double> gradient(n);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  TreeParams tree_params;
  tree_params.max_depth = params.max_depth;
  tree_params.min_samples_leaf = params.min_samples_leaf;
  tree_params.rule = SplitRule::best;
  Rng unused(0);  // all features are scanned, so the tree draws nothing

  stages_.reserve(params.stages);
  for (std::size_t stage = 0; stage < params.stages; ++stage) {
    for (std::size_t i = 0; i < n; ++i) {
      gradient[i] = data.targets[i] > current[i] ? quantile : quantile - 1.0;
    }
    auto tree = RegressionTree::fit(data.inputs, gradient, rows, tree_params, unused);

    // Leaf values: quantile of the residuals that land in each leaf.
    std::map<std::size_t, std::vector<double>> residuals;
    std::vector<std::size_t> leaf(n);
    for (std::size_t i = 0; i < n; ++i) {
      leaf[i] = tree.leaf_of(data.inputs[i]);
      residuals[leaf[i]].push_back(data.targets[i] - current[i]);
    }
    for (auto& [id, values] : residuals) {
      tree.set_leaf_value(id, empirical_quantile(std::move(values), quantile));
    }
    for (std::size_t i = 0; i < n; ++i) current[i] += learning_rate_ * tree.predict(data.inputs[i]);
    stages_.push_back(std::move(tree));
  }
}

double QuantileBoostedModel::predict(std::span<const double> x) const {
  double out = init_;
  for (const auto& tree : stages_) out += learning_rate_ * tree.predict(x);
  return out;
}

QuantileBoostedTrees::QuantileBoostedTrees(const TrainingSet& data, const BoostingParams& params)
    : Surrogate(checked_dimension(data, 2)),
      lower_(data, kLower, params),
      median_(data, kMedian, params),
      upper_(data, kUpper, params),
      min_target_(*std::min_element(data.targets.begin(), data.targets.end())),
      max_target_(*std::max_element(data.targets.begin(), data.targets.end())) {}

QuantileBoostedTrees::Quantiles QuantileBoostedTrees::quantile_predictions(
    std::span<const double> x) const {
  if (x.size() != dimension()) throw ShapeError("input dimension mismatch");
  return {lower_.predict(x), median_.predict(x), upper_.predict(x)};
}

Prediction QuantileBoostedTrees::predict_one(std::span<const double> x) const {
  auto q = quantile_predictions(x);
  return {std::clamp(q.median, min_target_, max_target_), std::max(0.0, 0.5 * (q.upper - q.lower))};
}

}  // namespace looptune
