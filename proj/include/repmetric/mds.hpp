#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "repmetric/types.hpp"

namespace repmetric {

struct MdsOptions {
  std::size_t dims = 2;
  std::uint64_t seed = 0;
  std::size_t restarts = 8;
  std::size_t max_iter = 500;
  double tol = 1e-9;
  std::size_t threads = 1;  // 0 = all cores
};

struct Embedding {
  Matrix coords;  // m x dims, centered at the origin
  double stress = 0.0;  // sqrt(Σ_{i<j} (D_ij - d_ij)² / Σ_{i<j} D_ij²)
  std::size_t n_iterations = 0;
  std::uint64_t seed = 0;
  std::size_t restart = 0;  // index of the winning restart
  std::vector<double> stress_history;  // normalized stress after init and after every iteration
};

/// Throws ValidationError unless square, finite, nonnegative, symmetric
/// within 1e-8 and with a zero diagonal.
void validate_distance_matrix(const Matrix& distances);

double normalized_stress(const Matrix& distances, const Matrix& coords);

/// Torgerson scaling of `distances` into `dims` dimensions.
Matrix classical_mds(const Matrix& distances, std::size_t dims);

/// One SMACOF run (unit weights) from `init`.
Embedding smacof(const Matrix& distances, Matrix init, std::size_t max_iter, double tol);

/// Lowest-stress SMACOF solution over `restarts` starts. Restart 0 starts
/// from classical scaling, the rest from seeded random configurations. Ties
/// go to the lower restart index.
Embedding mds_embed(const Matrix& distances, const MdsOptions& options = {});

}  // namespace repmetric
