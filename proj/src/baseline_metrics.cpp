#include "repmetric/baseline_metrics.hpp"

#include <algorithm>
#include <cmath>

#include "repmetric/errors.hpp"
#include "repmetric/kernel.hpp"

namespace repmetric {
namespace {

void check_same_size(const Matrix& k1, const Matrix& k2) {
  if (k1.rows() != k1.cols() || k2.rows() != k2.cols()) throw ValidationError("kernels must be square");
  if (k1.rows() != k2.rows()) {
    throw ValidationError("kernels cover different stimulus counts: " + std::to_string(k1.rows()) + " vs " +
                          std::to_string(k2.rows()));
  }
}

// Tiny relative to the input scale means the centered kernel is zero up to roundoff.
double centered_norm(const Matrix& centered, const Matrix& original) {
  const double norm = centered.norm();
  if (!(norm > 1e-12 * original.norm())) {
    throw ValidationError("degenerate representation: centered kernel is zero");
  }
  return norm;
}

void check_rsa_size(const Matrix& k1, const Matrix& k2) {
  check_same_size(k1, k2);
  if (k1.rows() < 3) throw ValidationError("RSA needs at least 3 stimuli");
}

}  // namespace

std::string_view to_string(BaselineMetric metric) {
  switch (metric) {
    case BaselineMetric::cka_distance: return "cka";
    case BaselineMetric::shape_metric: return "shape";
    case BaselineMetric::rsa_one_minus_corr: return "rsa_corr";
    case BaselineMetric::rsa_arccos: return "rsa_arccos";
  }
  return "unknown";
}

double cka(const Matrix& k1, const Matrix& k2) {
  check_same_size(k1, k2);
  const Matrix c1 = centered_kernel(k1);
  const Matrix c2 = centered_kernel(k2);
  const double n1 = centered_norm(c1, k1);
  const double n2 = centered_norm(c2, k2);
  // tr(A B) for symmetric A, B is the elementwise inner product.
  const double alignment = c1.cwiseProduct(c2).sum() / (n1 * n2);
  return std::clamp(alignment, 0.0, 1.0);
}

BaselineResult cka_distance(const Matrix& k1, const Matrix& k2) {
  return {1.0 - cka(k1, k2), BaselineMetric::cka_distance};
}

BaselineResult shape_metric(const Matrix& k1, const Matrix& k2) {
  return {std::acos(std::clamp(cka(k1, k2), -1.0, 1.0)), BaselineMetric::shape_metric};
}

Vector distance_vector(const Matrix& k, bool squared) {
  const Matrix d2 = squared_distance_matrix(k);
  const auto n = d2.rows();
  Vector v(n * (n - 1) / 2);
  Eigen::Index pos = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) v(pos++) = squared ? d2(i, j) : std::sqrt(d2(i, j));
  return v;
}

BaselineResult rsa_one_minus_corr(const Matrix& k1, const Matrix& k2, bool squared) {
  check_rsa_size(k1, k2);
  const Vector v1 = distance_vector(k1, squared);
  const Vector v2 = distance_vector(k2, squared);
  const Vector c1 = v1.array() - v1.mean();
  const Vector c2 = v2.array() - v2.mean();
  const double s1 = c1.norm();
  const double s2 = c2.norm();
  if (!(s1 > 1e-12 * v1.norm()) || !(s2 > 1e-12 * v2.norm())) {
    throw ValidationError("degenerate representation: distance vector has zero variance");
  }
  const double r = std::clamp(c1.dot(c2) / (s1 * s2), -1.0, 1.0);
  return {1.0 - r, BaselineMetric::rsa_one_minus_corr};
}

BaselineResult rsa_arccos(const Matrix& k1, const Matrix& k2, bool squared) {
  check_rsa_size(k1, k2);
  const Vector v1 = distance_vector(k1, squared);
  const Vector v2 = distance_vector(k2, squared);
  const double n1 = v1.norm();
  const double n2 = v2.norm();
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw ValidationError("degenerate representation: distance vector is zero");
  return {std::acos(std::clamp(v1.dot(v2) / (n1 * n2), -1.0, 1.0)), BaselineMetric::rsa_arccos};
}

}  // namespace repmetric
