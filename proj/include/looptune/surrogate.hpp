#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "looptune/rng.hpp"
#include "looptune/space.hpp"

namespace looptune {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class SurrogateKind { rf, et, gbrt, gp };

std::string_view to_string(SurrogateKind kind);  // "RF", "ET", "GBRT", "GP"
SurrogateKind parse_surrogate_kind(std::string_view text);
EncodingScheme scheme_for(SurrogateKind kind);

struct TrainingSet {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;  // lower is better
};

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

class Surrogate {
 public:
  virtual ~Surrogate() = default;

  virtual SurrogateKind kind() const = 0;
  std::size_t dimension() const { return dimension_; }

  // Throws ShapeError when an input's length differs from the fitted dimension.
  std::vector<Prediction> predict(std::span<const std::vector<double>> inputs) const;
  Prediction predict(std::span<const double> input) const;

 protected:
  explicit Surrogate(std::size_t dimension) : dimension_(dimension) {}
  virtual Prediction predict_one(std::span<const double> x) const = 0;

 private:
  std::size_t dimension_;
};

// Throws FitError unless data has >= min_rows rows of equal length and finite
// targets. Returns the row length.
std::size_t checked_dimension(const TrainingSet& data, std::size_t min_rows);

// Deterministic given (kind, data, seed).
std::unique_ptr<Surrogate> fit(SurrogateKind kind, const TrainingSet& data, std::uint64_t seed);

// =================================================================================================
// Regression trees

enum class SplitRule {
  best,    // best threshold among candidate features (CART)
  random,  // one random threshold per candidate feature (extremely randomized)
};

// Draws a threshold in [lo, hi) for the random split rule.
using ThresholdGenerator = std::function<double(double lo, double hi)>;

struct TreeParams {
  std::size_t max_depth = std::numeric_limits<std::size_t>::max();
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0 = all features
  SplitRule rule = SplitRule::best;
  ThresholdGenerator threshold_generator;  // random rule only; defaults to uniform draws
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
};

// Variance-reduction regression tree; rows with x[feature] <= threshold go left.
// Ties between candidate splits go to the lowest feature index, then the lowest
// threshold.
class RegressionTree {
 public:
  static RegressionTree fit(std::span<const std::vector<double>> inputs,
                            std::span<const double> targets, std::span<const std::size_t> rows,
                            const TreeParams& params, Rng& rng);

  double predict(std::span<const double> x) const { return nodes_[leaf_of(x)].value; }
  std::size_t leaf_of(std::span<const double> x) const;
  void set_leaf_value(std::size_t leaf, double value) { nodes_[leaf].value = value; }

  Split root_split() const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t depth() const;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    double value = 0.0;
  };

  std::size_t grow(std::span<const std::vector<double>> inputs, std::span<const double> targets,
                   std::vector<std::size_t>& rows, std::size_t depth, const TreeParams& params,
                   Rng& rng);

  std::vector<Node> nodes_;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t min_samples_leaf = 2;
  std::size_t max_features = 0;  // 0 = max(1, floor(sqrt(d)))
  bool bootstrap = true;
  SplitRule rule = SplitRule::best;
  ThresholdGenerator threshold_generator;

  static ForestParams random_forest();
  static ForestParams extra_trees();
};

// Random forest / extra trees. Mean is the average of the per-tree
// predictions and std their population standard deviation.
class TreeEnsemble : public Surrogate {
 public:
  TreeEnsemble(const TrainingSet& data, const ForestParams& params, std::uint64_t seed,
               SurrogateKind kind);

  SurrogateKind kind() const override { return kind_; }
  std::vector<double> per_tree_predictions(std::span<const double> x) const;
  const std::vector<RegressionTree>& trees() const { return trees_; }

 protected:
  Prediction predict_one(std::span<const double> x) const override;

 private:
  SurrogateKind kind_;
  std::vector<RegressionTree> trees_;
};

struct BoostingParams {
  std::size_t stages = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_samples_leaf = 1;
};

// Inverse empirical CDF: the smallest sample v with P(X <= v) >= q.
double empirical_quantile(std::vector<double> values, double q);

// Gradient boosting under the pinball loss for a single quantile level.
class QuantileBoostedModel {
 public:
  QuantileBoostedModel(const TrainingSet& data, double quantile, const BoostingParams& params);

  double predict(std::span<const double> x) const;
  double quantile() const { return quantile_; }

 private:
  double quantile_;
  double learning_rate_;
  double init_ = 0.0;
  std::vector<RegressionTree> stages_;
};

// Three quantile models at 0.16 / 0.50 / 0.84. Mean is the median model
// clamped to the training target range; std is half the 16-84 spread.
class QuantileBoostedTrees : public Surrogate {
 public:
  static constexpr double kLower = 0.16;
  static constexpr double kMedian = 0.50;
  static constexpr double kUpper = 0.84;

  QuantileBoostedTrees(const TrainingSet& data, const BoostingParams& params = {});

  SurrogateKind kind() const override { return SurrogateKind::gbrt; }

  struct Quantiles {
    double lower, median, upper;
  };
  Quantiles quantile_predictions(std::span<const double> x) const;

 protected:
  Prediction predict_one(std::span<const double> x) const override;

 private:
  QuantileBoostedModel lower_, median_, upper_;
  double min_target_, max_target_;
};

struct GpHyperparameters {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 0.0;
  double prior_mean = 0.0;
};

// Squared-exponential GP. Length scale is the median pairwise distance of
// the training inputs, signal variance the target variance, prior mean the
// target mean and noise `jitter * signal_variance`.
class GaussianProcess : public Surrogate {
 public:
  static constexpr double kDefaultJitter = 1e-6;

  explicit GaussianProcess(const TrainingSet& data, double jitter = kDefaultJitter);

  SurrogateKind kind() const override { return SurrogateKind::gp; }
  const GpHyperparameters& hyperparameters() const { return hyper_; }
  double kernel(std::span<const double> a, std::span<const double> b) const;

 protected:
  Prediction predict_one(std::span<const double> x) const override;

 private:
  GpHyperparameters hyper_;
  Eigen::MatrixXd inputs_;  // one training row per column
  Eigen::MatrixXd chol_lower_;
  Eigen::VectorXd alpha_;
};

}  // namespace looptune
