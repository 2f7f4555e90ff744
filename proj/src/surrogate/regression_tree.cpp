#include <algorithm>
#include <cmath>
#include <numeric>

#include "looptune/surrogate.hpp"

namespace looptune {
namespace {

// Candidate scores closer than this (relative) count as ties, so tie-breaking
// does not depend on summation order.
constexpr double kTieTolerance = 1e-12;

bool strictly_better(double score, double best) {
  if (!std::isfinite(best)) return score < best;
  return score < best - kTieTolerance * (1.0 + std::abs(best));
}

// Negated between-group sum of squares; minimizing it minimizes the SSE of the
// two children.
double split_score(double sum_left, std::size_t n_left, double sum_right, std::size_t n_right) {
  return -(sum_left * sum_left / static_cast<double>(n_left) +
           sum_right * sum_right / static_cast<double>(n_right));
}

}  // namespace

RegressionTree RegressionTree::fit(std::span<const std::vector<double>> inputs,
                                   std::span<const double> targets,
                                   std::span<const std::size_t> rows, const TreeParams& params,
                                   Rng& rng) {
  if (rows.empty()) throw FitError("cannot grow a tree on zero rows");
  RegressionTree tree;
  std::vector<std::size_t> work(rows.begin(), rows.end());
  tree.grow(inputs, targets, work, 0, params, rng);
  return tree;
}

std::size_t RegressionTree::grow(std::span<const std::vector<double>> inputs,
                                 std::span<const double> targets, std::vector<std::size_t>& rows,
                                 std::size_t depth, const TreeParams& params, Rng& rng) {
  const std::size_t n = rows.size();
  double sum = 0.0;
  double lo_y = targets[rows.front()];
  double hi_y = lo_y;
  for (std::size_t r : rows) {
    sum += targets[r];
    lo_y = std::min(lo_y, targets[r]);
    hi_y = std::max(hi_y, targets[r]);
  }
  const std::size_t self = nodes_.size();
  nodes_.push_back(Node{-1, 0.0, 0, 0, sum / static_cast<double>(n)});

  const std::size_t min_leaf = std::max<std::size_t>(1, params.min_samples_leaf);
  if (depth >= params.max_depth || n < 2 * min_leaf || lo_y == hi_y) return self;

  const std::size_t dims = inputs[rows.front()].size();
  auto is_constant = [&](std::size_t f) {
    double first = inputs[rows.front()][f];
    return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return inputs[r][f] == first; });
  };

  std::vector<std::size_t> features;
  if (params.max_features == 0 || params.max_features >= dims) {
    for (std::size_t f = 0; f < dims; ++f) {
      if (!is_constant(f)) features.push_back(f);
    }
  } else {
    // Visit features in a random order until max_features non-constant ones
    // have been seen.
    std::vector<std::size_t> order(dims);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < dims && features.size() < params.max_features; ++i) {
      std::size_t j = i + rng.index(dims - i);
      std::swap(order[i], order[j]);
      if (!is_constant(order[i])) features.push_back(order[i]);
    }
    std::sort(features.begin(), features.end());
  }

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> column(n);  // (x, y)

  for (std::size_t f : features) {
    if (params.rule == SplitRule::best) {
      for (std::size_t i = 0; i < n; ++i) column[i] = {inputs[rows[i]][f], targets[rows[i]]};
      std::stable_sort(column.begin(), column.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_sum = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left_sum += column[i - 1].second;
        if (column[i - 1].first == column[i].first) continue;
        if (i < min_leaf || n - i < min_leaf) continue;
        double score = split_score(left_sum, i, sum - left_sum, n - i);
        if (strictly_better(score, best_score)) {
          double threshold = 0.5 * (column[i - 1].first + column[i].first);
          if (threshold >= column[i].first) threshold = column[i - 1].first;
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = threshold;
        }
      }
    } else {
      double lo = inputs[rows.front()][f];
      double hi = lo;
      for (std::size_t r : rows) {
        lo = std::min(lo, inputs[r][f]);
        hi = std::max(hi, inputs[r][f]);
      }
      double threshold =
          params.threshold_generator ? params.threshold_generator(lo, hi) : rng.uniform(lo, hi);
      double left_sum = 0.0;
      std::size_t n_left = 0;
      for (std::size_t r : rows) {
        if (inputs[r][f] <= threshold) {
          left_sum += targets[r];
          ++n_left;
        }
      }
      if (n_left < min_leaf || n - n_left < min_leaf) continue;
      double score = split_score(left_sum, n_left, sum - left_sum, n - n_left);
      if (strictly_better(score, best_score)) {
        best_score = score;
        best_feature = static_cast<int>(f);
        best_threshold = threshold;
      }
    }
  }

  if (best_feature < 0) return self;

  const auto bf = static_cast<std::size_t>(best_feature);
  std::vector<std::size_t> left_rows;
  std::vector<std::size_t> right_rows;
  for (std::size_t r : rows) {
    (inputs[r][bf] <= best_threshold ? left_rows : right_rows).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  std::size_t left = grow(inputs, targets, left_rows, depth + 1, params, rng);
  std::size_t right = grow(inputs, targets, right_rows, depth + 1, params, rng);
  nodes_[self].feature = best_feature;
  nodes_[self].threshold = best_threshold;
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::size_t RegressionTree::leaf_of(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes_[node].feature >= 0) {
    const auto& nd = nodes_[node];
    node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return node;
}

Split RegressionTree::root_split() const {
  if (nodes_.empty() || nodes_.front().feature < 0) return {};
  return {nodes_.front().feature, nodes_.front().threshold};
}

std::size_t RegressionTree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes_[node].feature >= 0) {
      stack.emplace_back(nodes_[node].left, d + 1);
      stack.emplace_back(nodes_[node].right, d + 1);
    }
  }
  return deepest;
}

}  // namespace looptune
