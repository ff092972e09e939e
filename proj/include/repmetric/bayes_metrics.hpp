#pragma once

// Monte-Carlo distances between two zero-mean Gaussian predictive
// distributions P1, P2.
//
// Draws x1 ~ P1 come from normal stream `streams.first` of `seed`, x2 ~ P2
// from `streams.second`. Both estimators average paired summands
//
//   s_i = ( f(log p2(x1_i) - log p1(x1_i)) + f(log p1(x2_i) - log p2(x2_i)) ) / 2
//
// with f(d) = max(0, 1 - e^d) for TVD and, for JSD in bits,
// s_i = 1 - ( log2(1 + e^d1) + log2(1 + e^d2) ) / 2. The standard error is
// sd(s) / sqrt(N). Log ratios smaller than the rounding resolution of the
// log densities are treated as exactly zero, so representations that are
// equivalent up to rotation or scale get distance 0 rather than roundoff.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "repmetric/mvn.hpp"
#include "repmetric/types.hpp"

namespace repmetric {

enum class BayesMetric { tvd, jsd, js_distance };

std::string_view to_string(BayesMetric metric);

struct DistanceEstimate {
  double value = 0.0;      // clamped to [0, 1]
  double raw_value = 0.0;  // before clamping
  double std_error = 0.0;
  double summand_variance = 0.0;  // estimator variance = summand_variance / N
  std::size_t n_samples = 0;
  BayesMetric metric = BayesMetric::tvd;
  std::uint64_t seed = 0;
  bool se_degenerate = false;  // js_distance only: SE taken as sqrt(SE(jsd)) because jsd <= SE(jsd)
};

struct DistanceGradient {
  Matrix d_cov1;
  Matrix d_cov2;
  std::uint64_t seed = 0;
};

struct StreamPair {
  std::uint64_t first = 0;
  std::uint64_t second = 1;
};

/// forward(i) = log p2(x1_i) - log p1(x1_i); backward(i) = log p1(x2_i) - log p2(x2_i).
struct LogRatios {
  Vector forward;
  Vector backward;
};

LogRatios log_ratios(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws, std::uint64_t seed,
                     StreamPair streams = {});

struct PairEstimates {
  DistanceEstimate tvd;
  DistanceEstimate jsd;
  DistanceEstimate js_distance;
};

/// All three distances from one shared set of draws.
PairEstimates estimate_pair(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws,
                            std::uint64_t seed, StreamPair streams = {});

DistanceEstimate tvd(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws, std::uint64_t seed,
                     StreamPair streams = {});
DistanceEstimate jsd(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws, std::uint64_t seed,
                     StreamPair streams = {});
DistanceEstimate js_distance(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws,
                             std::uint64_t seed, StreamPair streams = {});

/// Square root of a JSD estimate with a delta-method standard error:
/// SE / (2 sqrt(d)) when d > SE, otherwise sqrt(SE) with se_degenerate set.
DistanceEstimate js_distance_from(const DistanceEstimate& jsd_estimate);

/// Reparameterized gradients of the raw (unclamped) estimates with respect
/// to the two covariance matrices, using the same draws as the estimates
/// for the same seed. TVD takes derivative 0 at the max(0, .) kink.
DistanceGradient tvd_gradient(const Matrix& cov1, const Matrix& cov2, std::size_t n_draws, std::uint64_t seed,
                              StreamPair streams = {});
DistanceGradient jsd_gradient(const Matrix& cov1, const Matrix& cov2, std::size_t n_draws, std::uint64_t seed,
                              StreamPair streams = {});

struct VarianceProfilePoint {
  double value = 0.0;
  double summand_variance = 0.0;
};

/// Estimate and single-summand variance for each covariance pair. Pair i
/// uses seed derive_seed(seed, i).
std::vector<VarianceProfilePoint> estimator_variance_profile(std::span<const std::pair<Matrix, Matrix>> pairs,
                                                             BayesMetric metric, std::size_t n_draws,
                                                             std::uint64_t seed);

}  // namespace repmetric
