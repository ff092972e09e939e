#pragma once

// Kernel-based comparison measures: linear CKA and its arccos shape metric,
// and two RSA variants over the strict upper triangle of the (squared)
// Euclidean distance matrices derived from the kernels.

#include <string_view>

#include "repmetric/types.hpp"

namespace repmetric {

enum class BaselineMetric { cka_distance, shape_metric, rsa_one_minus_corr, rsa_arccos };

std::string_view to_string(BaselineMetric metric);

struct BaselineResult {
  double value = 0.0;
  BaselineMetric metric = BaselineMetric::cka_distance;
};

/// Linear CKA of two kernels over the same stimuli, clamped to [0, 1].
double cka(const Matrix& k1, const Matrix& k2);

BaselineResult cka_distance(const Matrix& k1, const Matrix& k2);
BaselineResult shape_metric(const Matrix& k1, const Matrix& k2);

/// `squared` selects squared Euclidean distances (the default) or plain ones.
BaselineResult rsa_one_minus_corr(const Matrix& k1, const Matrix& k2, bool squared = true);
BaselineResult rsa_arccos(const Matrix& k1, const Matrix& k2, bool squared = true);

/// Strict upper triangle of the stimulus distance matrix of `k`, row by row.
Vector distance_vector(const Matrix& k, bool squared = true);

}  // namespace repmetric
