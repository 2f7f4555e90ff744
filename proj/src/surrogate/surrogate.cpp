#include <algorithm>
#include <cmath>
#include <string>

#include "looptune/surrogate.hpp"

namespace looptune {

std::string_view to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::rf: return "RF";
    case SurrogateKind::et: return "ET";
    case SurrogateKind::gbrt: return "GBRT";
    case SurrogateKind::gp: return "GP";
  }
  return "?";
}

SurrogateKind parse_surrogate_kind(std::string_view text) {
  if (text == "RF") return SurrogateKind::rf;
  if (text == "ET") return SurrogateKind::et;
  if (text == "GBRT") return SurrogateKind::gbrt;
  if (text == "GP") return SurrogateKind::gp;
  throw std::invalid_argument("unknown learner '" + std::string(text) +
                              "' (expected RF, ET, GBRT or GP)");
}

EncodingScheme scheme_for(SurrogateKind kind) {
  return kind == SurrogateKind::gp ? EncodingScheme::gp : EncodingScheme::tree;
}

std::vector<Prediction> Surrogate::predict(std::span<const std::vector<double>> inputs) const {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(predict(std::span<const double>(x)));
  return out;
}

Prediction Surrogate::predict(std::span<const double> input) const {
  if (input.size() != dimension_) {
    throw ShapeError("input has " + std::to_string(input.size()) + " components, model expects " +
                     std::to_string(dimension_));
  }
  return predict_one(input);
}

std::size_t checked_dimension(const TrainingSet& data, std::size_t min_rows) {
  if (data.inputs.empty()) throw FitError("cannot fit a surrogate on an empty training set");
  if (data.inputs.size() != data.targets.size()) {
    throw FitError("training set has " + std::to_string(data.inputs.size()) + " inputs but " +
                   std::to_string(data.targets.size()) + " targets");
  }
  if (data.inputs.size() < min_rows) {
    throw FitError("this surrogate needs at least " + std::to_string(min_rows) + " rows");
  }
  const std::size_t dims = data.inputs.front().size();
  for (const auto& row : data.inputs) {
    if (row.size() != dims) throw FitError("training rows differ in length");
  }
  for (double y : data.targets) {
    if (!std::isfinite(y)) throw FitError("training targets must be finite");
  }
  return dims;
}

std::unique_ptr<Surrogate> fit(SurrogateKind kind, const TrainingSet& data, std::uint64_t seed) {
  switch (kind) {
    case SurrogateKind::rf:
      return std::make_unique<TreeEnsemble>(data, ForestParams::random_forest(), seed, kind);
    case SurrogateKind::et:
      return std::make_unique<TreeEnsemble>(data, ForestParams::extra_trees(), seed, kind);
    case SurrogateKind::gbrt:
      return std::make_unique<QuantileBoostedTrees>(data);
    case SurrogateKind::gp:
      return std::make_unique<GaussianProcess>(data);
  }
  throw FitError("unknown surrogate kind");
}

// =================================================================================================
// Forests

ForestParams ForestParams::random_forest() {
  ForestParams p;
  p.bootstrap = true;
  p.rule = SplitRule::best;
  return p;
}

ForestParams ForestParams::extra_trees() {
  ForestParams p;
  p.bootstrap = false;
  p.rule = SplitRule::random;
  return p;
}

TreeEnsemble::TreeEnsemble(const TrainingSet& data, const ForestParams& params,
                           std::uint64_t seed, SurrogateKind kind)
    : Surrogate(checked_dimension(data, 1)), kind_(kind) {
  const std::size_t n = data.inputs.size();
  const std::size_t dims = dimension();

  TreeParams tree_params;
  tree_params.min_samples_leaf = params.min_samples_leaf;
  tree_params.max_features =
      params.max_features != 0
          ? params.max_features
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(dims))));
  tree_params.rule = params.rule;
  tree_params.threshold_generator = params.threshold_generator;

  trees_.reserve(params.n_trees);
  std::vector<std::size_t> rows(n);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(mix_seed(seed, t));
    for (std::size_t i = 0; i < n; ++i) rows[i] = params.bootstrap ? rng.index(n) : i;
    trees_.push_back(RegressionTree::fit(data.inputs, data.targets, rows, tree_params, rng));
  }
}

std::vector<double> TreeEnsemble::per_tree_predictions(std::span<const double> x) const {
  if (x.size() != dimension()) throw ShapeError("input dimension mismatch");
  std::vector<double> out;
  out.reserve(trees_.size());
  for (const auto& tree : trees_) out.push_back(tree.predict(x));
  return out;
}

Prediction TreeEnsemble::predict_one(std::span<const double> x) const {
  const std::vector<double> per_tree = per_tree_predictions(x);
  const auto [lo, hi] = std::minmax_element(per_tree.begin(), per_tree.end());
  if (*lo == *hi) return {*lo, 0.0};
  double sum = 0.0;
  for (double v : per_tree) sum += v;
  const double n = static_cast<double>(per_tree.size());
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : per_tree) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

}  // namespace looptune
