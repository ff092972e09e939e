#pragma once

#include <cstddef>
#include <span>

#include "repmetric/types.hpp"

namespace repmetric {

/// n stimuli (rows) by k features.
struct RepresentationMatrix {
  Matrix values;
  Labels labels;  // empty, or one name per stimulus
};

/// Linear kernel XXᵀ over n stimuli.
struct KernelMatrix {
  Matrix values;
  Labels labels;

  Eigen::Index size() const { return values.rows(); }
};

/// Throws ValidationError unless finite with at least two stimuli.
void validate_representation(const RepresentationMatrix& x);

/// Throws ValidationError unless square, finite, symmetric within 1e-10
/// (relative) and, when `check_psd`, with all eigenvalues >= -1e-8 tr(K)/n.
void validate_kernel(const KernelMatrix& k, bool check_psd = true);

KernelMatrix gram(const RepresentationMatrix& x);

/// Cholesky factor of an SPD matrix, plus the diagonal jitter that was needed.
struct CholeskyFactor {
  Matrix lower;
  double jitter_used = 0.0;
};

/// Plain Cholesky first; on failure retries with eps*I for
/// eps = 1e-10 tr(C)/n, x10 per retry, up to 1e-6 tr(C)/n. Throws
/// NumericalError if every attempt fails.
CholeskyFactor jittered_cholesky(const Matrix& covariance);

/// Zero-mean Gaussian readout covariance (1-a) n K / tr(K) + a I.
struct PredictiveCovariance {
  Matrix covariance;  // before jitter; trace n
  double a = 0.0;
  Matrix cholesky;    // lower triangular, factor of covariance + jitter_used * I
  double jitter_used = 0.0;

  Eigen::Index dim() const { return covariance.rows(); }
};

PredictiveCovariance predictive_covariance(const KernelMatrix& k, double a);

/// D2(i,j) = K(i,i) + K(j,j) - 2 K(i,j), zero diagonal, clamped at 0.
Matrix squared_distance_matrix(const Matrix& k);

/// H K H with H = I - 11ᵀ/n.
Matrix centered_kernel(const Matrix& k);

/// Kernel of a stimulus subset: the principal submatrix on `indices`.
KernelMatrix principal_submatrix(const KernelMatrix& k, std::span<const std::size_t> indices);
KernelMatrix leading_submatrix(const KernelMatrix& k, std::size_t n);

}  // namespace repmetric
