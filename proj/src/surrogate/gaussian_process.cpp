#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "looptune/surrogate.hpp"

namespace looptune {

GaussianProcess::GaussianProcess(const TrainingSet& data, double jitter)
    : Surrogate(checked_dimension(data, 2)) {
  const std::size_t n = data.inputs.size();
  const std::size_t dims = dimension();

  inputs_.resize(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims; ++d) {
      inputs_(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = data.inputs[i][d];
    }
  }

  std::vector<double> distances;
  distances.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      distances.push_back((inputs_.col(static_cast<Eigen::Index>(i)) -
                           inputs_.col(static_cast<Eigen::Index>(j)))
                              .norm());
    }
  }
  std::sort(distances.begin(), distances.end());
  const std::size_t m = distances.size();
  double median = m % 2 == 1 ? distances[m / 2] : 0.5 * (distances[m / 2 - 1] + distances[m / 2]);
  hyper_.length_scale = median > 0.0 ? median : 1.0;

  double mean = 0.0;
  for (double y : data.targets) mean += y;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double y : data.targets) var += (y - mean) * (y - mean);
  var /= static_cast<double>(n);
  hyper_.prior_mean = mean;
  hyper_.signal_variance = var > 0.0 ? var : 1.0;
  hyper_.noise_variance = jitter * hyper_.signal_variance;

  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double sq = (inputs_.col(i) - inputs_.col(j)).squaredNorm();
      k(i, j) = k(j, i) =
          hyper_.signal_variance * std::exp(-sq / (2.0 * hyper_.length_scale * hyper_.length_scale));
    }
    k(i, i) += hyper_.noise_variance;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw FitError("GP covariance is not positive definite");
  chol_lower_ = llt.matrixL();

  Eigen::VectorXd centered(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) centered(static_cast<Eigen::Index>(i)) = data.targets[i] - mean;
  alpha_ = llt.solve(centered);
}

double GaussianProcess::kernel(std::span<const double> a, std::span<const double> b) const {
  double sq = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) sq += (a[d] - b[d]) * (a[d] - b[d]);
  return hyper_.signal_variance * std::exp(-sq / (2.0 * hyper_.length_scale * hyper_.length_scale));
}

Prediction GaussianProcess::predict_one(std::span<const double> x) const {
  const Eigen::Index n = inputs_.cols();
  Eigen::Map<const Eigen::VectorXd> point(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd kstar(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double sq = (inputs_.col(i) - point).squaredNorm();
    kstar(i) =
        hyper_.signal_variance * std::exp(-sq / (2.0 * hyper_.length_scale * hyper_.length_scale));
  }
  double mean = hyper_.prior_mean + kstar.dot(alpha_);
  Eigen::VectorXd v = chol_lower_.triangularView<Eigen::Lower>().solve(kstar);
  double var = hyper_.signal_variance - v.squaredNorm();
  return {mean, std::sqrt(std::max(0.0, var))};
}

}  // namespace looptune
