#include "repmetric/kernel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <string>

#include "repmetric/errors.hpp"

namespace repmetric {

void validate_representation(const RepresentationMatrix& x) {
  if (x.values.rows() < 2) throw ValidationError("representation needs at least 2 stimuli");
  if (x.values.cols() < 1) throw ValidationError("representation has no features");
  if (!x.values.allFinite()) throw ValidationError("representation contains non-finite values");
  if (!x.labels.empty() && static_cast<Eigen::Index>(x.labels.size()) != x.values.rows()) {
    throw ValidationError("representation label count does not match stimulus count");
  }
}

void validate_kernel(const KernelMatrix& k, bool check_psd) {
  const auto n = k.values.rows();
  if (n != k.values.cols()) throw ValidationError("kernel must be square");
  if (n < 1) throw ValidationError("kernel is empty");
  if (!k.values.allFinite()) throw ValidationError("kernel contains non-finite values");
  if (!k.labels.empty() && static_cast<Eigen::Index>(k.labels.size()) != n) {
    throw ValidationError("kernel label count does not match its size");
  }
  const double scale = k.values.cwiseAbs().maxCoeff();
  if ((k.values - k.values.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ValidationError("kernel is not symmetric");
  }
  if (check_psd) {
    const Matrix sym = 0.5 * (k.values + k.values.transpose());
    const double floor = -1e-8 * std::abs(sym.trace()) / static_cast<double>(n);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < floor) {
      throw ValidationError("kernel is not positive semidefinite (min eigenvalue " +
                            std::to_string(eig.eigenvalues().minCoeff()) + ")");
    }
  }
}

KernelMatrix gram(const RepresentationMatrix& x) {
  validate_representation(x);
  const auto n = x.values.rows();
  // rankUpdate fills the lower triangle only, so each unordered pair is computed once.
  Matrix k = Matrix::Zero(n, n);
  k.selfadjointView<Eigen::Lower>().rankUpdate(x.values);
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return {std::move(k), x.labels};
}

CholeskyFactor jittered_cholesky(const Matrix& covariance) {
  const auto n = covariance.rows();
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

  const double unit = covariance.trace() / static_cast<double>(n);
  if (!(unit > 0.0) || !std::isfinite(unit)) throw NumericalError("covariance is not positive definite");
  constexpr std::array<double, 5> kSchedule{1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (const double rel : kSchedule) {
    const double eps = rel * unit;
    Matrix jittered = covariance;
    jittered.diagonal().array() += eps;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), eps};
  }
  throw NumericalError("covariance is not positive definite even with jitter " + std::to_string(1e-6 * unit));
}

PredictiveCovariance predictive_covariance(const KernelMatrix& k, double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("mixture weight a must lie in [0, 1]");
  validate_kernel(k, false);
  const auto n = k.values.rows();
  const double tr = k.values.trace();

  PredictiveCovariance pc;
  pc.a = a;
  if (a < 1.0) {
    if (!(tr > 0.0)) throw ValidationError("degenerate representation: kernel trace is not positive");
    pc.covariance = ((1.0 - a) * static_cast<double>(n) / tr) * k.values;
  } else {
    pc.covariance = Matrix::Zero(n, n);
  }
  pc.covariance.diagonal().array() += a;

  auto factor = jittered_cholesky(pc.covariance);
  pc.cholesky = std::move(factor.lower);
  pc.jitter_used = factor.jitter_used;
  return pc;
}

Matrix squared_distance_matrix(const Matrix& k) {
  const auto n = k.rows();
  Matrix d2(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d2(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = std::max(0.0, k(i, i) + k(j, j) - 2.0 * k(i, j));
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

Matrix centered_kernel(const Matrix& k) {
  const Vector row_means = k.rowwise().mean();
  const Vector col_means = k.colwise().mean().transpose();
  const double grand = k.mean();
  Matrix c = k;
  c.colwise() -= row_means;
  c.rowwise() -= col_means.transpose();
  c.array() += grand;
  return c;
}

KernelMatrix principal_submatrix(const KernelMatrix& k, std::span<const std::size_t> indices) {
  const auto m = static_cast<Eigen::Index>(indices.size());
  KernelMatrix sub;
  sub.values.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (indices[i] >= static_cast<std::size_t>(k.size())) throw ValidationError("stimulus index out of range");
    for (Eigen::Index j = 0; j < m; ++j) {
      sub.values(i, j) = k.values(static_cast<Eigen::Index>(indices[i]), static_cast<Eigen::Index>(indices[j]));
    }
  }
  if (!k.labels.empty()) {
    for (auto idx : indices) sub.labels.push_back(k.labels[idx]);
  }
  return sub;
}

KernelMatrix leading_submatrix(const KernelMatrix& k, std::size_t n) {
  if (n > static_cast<std::size_t>(k.size())) {
    throw ValidationError("requested " + std::to_string(n) + " stimuli but the pool holds " +
                          std::to_string(k.size()));
  }
  const auto m = static_cast<Eigen::Index>(n);
  KernelMatrix sub{k.values.topLeftCorner(m, m), {}};
  if (!k.labels.empty()) sub.labels.assign(k.labels.begin(), k.labels.begin() + m);
  return sub;
}

}  // namespace repmetric
