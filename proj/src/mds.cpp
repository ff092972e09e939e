#include "repmetric/mds.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "repmetric/detail/parallel.hpp"
#include "repmetric/errors.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {
namespace {

Matrix pairwise_distances(const Matrix& coords) {
  const auto m = coords.rows();
  Matrix d = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) d(i, j) = d(j, i) = (coords.row(i) - coords.row(j)).norm();
  return d;
}

double raw_stress(const Matrix& distances, const Matrix& fitted) {
  return 0.5 * (distances - fitted).squaredNorm();
}

double normalizer(const Matrix& distances) { return 0.5 * distances.squaredNorm(); }

double to_normalized(double raw, double norm) { return norm > 0.0 ? std::sqrt(raw / norm) : std::sqrt(raw); }

Matrix centered(Matrix coords) {
  coords.rowwise() -= coords.colwise().mean();
  return coords;
}

Matrix random_init(Eigen::Index m, std::size_t dims, double spread, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::uniform_real_distribution<double> uniform(-spread, spread);
  Matrix init(m, static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < init.rows(); ++i)
    for (Eigen::Index j = 0; j < init.cols(); ++j) init(i, j) = uniform(engine);
  return init;
}

}  // namespace

void validate_distance_matrix(const Matrix& distances) {
  if (distances.rows() != distances.cols()) throw ValidationError("distance matrix must be square");
  if (distances.rows() < 1) throw ValidationError("distance matrix is empty");
  if (!distances.allFinite()) throw ValidationError("distance matrix contains non-finite values");
  if ((distances.array() < 0.0).any()) throw ValidationError("distances must be nonnegative");
  if ((distances - distances.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw ValidationError("distance matrix is not symmetric");
  }
  if (distances.diagonal().cwiseAbs().maxCoeff() > 0.0) throw ValidationError("distance matrix diagonal must be zero");
}

double normalized_stress(const Matrix& distances, const Matrix& coords) {
  return to_normalized(raw_stress(distances, pairwise_distances(coords)), normalizer(distances));
}

Matrix classical_mds(const Matrix& distances, std::size_t dims) {
  const auto m = distances.rows();
  const Matrix sq = distances.array().square();
  Matrix b = sq;
  b.colwise() -= sq.rowwise().mean();
  b.rowwise() -= sq.colwise().mean();
  b.array() += sq.mean();
  b *= -0.5;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
  Matrix coords = Matrix::Zero(m, static_cast<Eigen::Index>(dims));
  for (std::size_t d = 0; d < dims && static_cast<Eigen::Index>(d) < m; ++d) {
    const auto idx = m - 1 - static_cast<Eigen::Index>(d);  // eigenvalues ascend
    const double lambda = std::max(eig.eigenvalues()(idx), 0.0);
    coords.col(static_cast<Eigen::Index>(d)) = eig.eigenvectors().col(idx) * std::sqrt(lambda);
  }
  return coords;
}

Embedding smacof(const Matrix& distances, Matrix init, std::size_t max_iter, double tol) {
  validate_distance_matrix(distances);
  const auto m = distances.rows();
  if (init.rows() != m) throw ValidationError("initial configuration has the wrong number of points");
  const double norm = normalizer(distances);

  Embedding out;
  Matrix x = std::move(init);
  Matrix fitted = pairwise_distances(x);
  double stress = raw_stress(distances, fitted);
  out.stress_history.push_back(to_normalized(stress, norm));

  for (std::size_t iter = 0; iter < max_iter && stress > 0.0; ++iter) {
    // Guttman transform with unit weights: X <- B(X) X / m.
    Matrix b(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        b(i, j) = (i != j && fitted(i, j) > 0.0) ? -distances(i, j) / fitted(i, j) : 0.0;
      }
      b(i, i) = -b.row(i).sum();
    }
    x = (b * x) / static_cast<double>(m);
    fitted = pairwise_distances(x);
    const double next = raw_stress(distances, fitted);
    out.stress_history.push_back(to_normalized(next, norm));
    out.n_iterations = iter + 1;
    const double decrease = stress - next;
    stress = next;
    if (stress == 0.0 || decrease <= tol * (stress + decrease)) break;
  }
  out.coords = centered(std::move(x));
  out.stress = to_normalized(stress, norm);
  return out;
}

Embedding mds_embed(const Matrix& distances, const MdsOptions& options) {
  validate_distance_matrix(distances);
  if (options.dims < 1) throw ValidationError("embedding needs at least one dimension");
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  const auto m = distances.rows();
  const double spread = m > 1 ? distances.sum() / static_cast<double>(m * (m - 1)) : 0.0;

  std::vector<Embedding> runs(restarts);
  detail::parallel_for(restarts, options.threads, [&](std::size_t r) {
    Matrix init = r == 0 ? classical_mds(distances, options.dims)
                         : random_init(m, options.dims, spread, derive_seed(options.seed, r));
    runs[r] = smacof(distances, std::move(init), options.max_iter, options.tol);
    runs[r].restart = r;
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].stress < runs[best].stress) best = r;
  Embedding result = std::move(runs[best]);
  result.seed = options.seed;
  return result;
}

}  // namespace repmetric
