#include "repmetric/mvn.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "repmetric/errors.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {

GaussianModel::GaussianModel(PredictiveCovariance cov) : cov_(std::move(cov)) {
  if (cov_.dim() < 1) throw ValidationError("Gaussian model needs dimension >= 1");
  log_det_ = 2.0 * cov_.cholesky.diagonal().array().log().sum();
  if (!std::isfinite(log_det_)) throw NumericalError("covariance log-determinant is not finite");
}

GaussianModel GaussianModel::from_covariance(const Matrix& covariance) {
  if (covariance.rows() != covariance.cols()) throw ValidationError("covariance must be square");
  if (!covariance.allFinite()) throw ValidationError("covariance contains non-finite values");
  PredictiveCovariance pc;
  pc.covariance = covariance;
  pc.a = 0.0;
  auto factor = jittered_cholesky(covariance);
  pc.cholesky = std::move(factor.lower);
  pc.jitter_used = factor.jitter_used;
  return GaussianModel(std::move(pc));
}

Matrix standard_normal_block(std::size_t rows, Eigen::Index cols, std::uint64_t seed, std::uint64_t stream) {
  std::mt19937_64 engine(derive_seed(seed, stream));
  std::normal_distribution<double> normal;
  Matrix z(static_cast<Eigen::Index>(rows), cols);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = normal(engine);
  return z;
}

SampleBlock sample(const GaussianModel& model, std::size_t n_draws, std::uint64_t seed, std::uint64_t stream) {
  if (n_draws < 1) throw ValidationError("need at least one draw");
  SampleBlock block;
  block.seed = seed;
  block.stream = stream;
  block.standard = standard_normal_block(n_draws, model.dim(), seed, stream);
  block.draws = block.standard * model.cholesky().transpose();
  return block;
}

Vector log_density(const GaussianModel& model, const Matrix& points) {
  if (points.cols() != model.dim()) throw ValidationError("point dimension does not match the model");
  if (!points.allFinite()) throw ValidationError("points contain non-finite values");
  const Matrix whitened = model.cholesky().triangularView<Eigen::Lower>().solve(points.transpose());
  const double n = static_cast<double>(model.dim());
  const double constant = n * std::log(2.0 * std::numbers::pi) + model.log_det();
  return (-0.5 * (constant + whitened.colwise().squaredNorm().array())).matrix().transpose();
}

}  // namespace repmetric
