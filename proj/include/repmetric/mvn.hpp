#pragma once

#include <cstddef>
#include <cstdint>

#include "repmetric/kernel.hpp"
#include "repmetric/types.hpp"

namespace repmetric {

/// Zero-mean multivariate normal held through its Cholesky factor.
class GaussianModel {
 public:
  explicit GaussianModel(PredictiveCovariance cov);

  /// Arbitrary SPD covariance (no trace normalization). Factorized with the
  /// same jitter schedule as predictive covariances.
  static GaussianModel from_covariance(const Matrix& covariance);

  Eigen::Index dim() const { return cov_.dim(); }
  const Matrix& covariance() const { return cov_.covariance; }
  const Matrix& cholesky() const { return cov_.cholesky; }
  double jitter_used() const { return cov_.jitter_used; }
  /// log det of the factorized matrix, 2 Σ log L(i,i).
  double log_det() const { return log_det_; }

 private:
  PredictiveCovariance cov_;
  double log_det_ = 0.0;
};

/// N draws, one per row. `standard` keeps the underlying N(0, I) variates so
/// gradients can reuse them.
struct SampleBlock {
  Matrix standard;  // Z, N x n
  Matrix draws;     // Y = Z Lᵀ, N x n
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// N x n standard normals from the stream (seed, stream). Row i is the same
/// for every N > i. Bit-reproducible within one build.
Matrix standard_normal_block(std::size_t rows, Eigen::Index cols, std::uint64_t seed, std::uint64_t stream);

SampleBlock sample(const GaussianModel& model, std::size_t n_draws, std::uint64_t seed, std::uint64_t stream = 0);

/// log p(x) for each row of `points`, via triangular solves.
Vector log_density(const GaussianModel& model, const Matrix& points);

}  // namespace repmetric
