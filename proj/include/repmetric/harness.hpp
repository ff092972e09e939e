#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "repmetric/bayes_metrics.hpp"
#include "repmetric/kernel.hpp"
#include "repmetric/matrix_io.hpp"
#include "repmetric/types.hpp"

namespace repmetric {

inline constexpr double kDefaultB = 0.01;
inline constexpr std::size_t kDefaultSamples = 10000;

/// Noise mixture weight for n stimuli when noise variance grows in proportion to n.
double heuristic_a(std::size_t n, double b);

enum class Metric { tvd, jsd, js_distance, cka_distance, shape_metric, rsa_one_minus_corr, rsa_arccos };

/// Names used on the command line and in output files: tvd, jsd, js_distance,
/// cka, shape, rsa_corr, rsa_arccos.
std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view name);
std::vector<Metric> parse_metric_list(std::string_view comma_separated);
bool is_bayes(Metric metric);

struct NamedKernel {
  std::string name;
  KernelMatrix kernel;
};

/// Loads every manifest entry as a kernel; representation entries go through gram().
std::vector<NamedKernel> load_kernels(const LayerManifest& manifest);

/// Seed of the (unordered) layer pair under master seed `seed`.
std::uint64_t pair_seed(std::uint64_t seed, std::string_view label1, std::string_view label2);

struct DistanceMatrix {
  Metric metric = Metric::tvd;
  Labels labels;
  Matrix values;      // NaN marks a skipped pair
  Matrix std_errors;  // zero for baselines
  std::vector<std::pair<std::size_t, std::size_t>> holes;
};

enum class FailurePolicy { abort, skip };

struct PairwiseOptions {
  std::vector<Metric> metrics{Metric::tvd, Metric::jsd};
  double a = 0.5;
  std::size_t n_samples = kDefaultSamples;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // 0 = all cores
  FailurePolicy on_error = FailurePolicy::abort;
  bool rsa_squared = true;
};

/// Every unordered pair once. For Bayes metrics the pair's draws use
/// pair_seed(seed, ...) with stream 0 attached to the lexicographically
/// smaller label, so results do not depend on entry order or threads.
std::map<Metric, DistanceMatrix> pairwise_matrix(std::span<const NamedKernel> layers, const PairwiseOptions& options);

/// JSD (and optionally TVD) between one pair of layers, with the same seed
/// scheme as pairwise_matrix.
PairEstimates pair_estimates(const NamedKernel& first, const NamedKernel& second, double a, std::size_t n_samples,
                             std::uint64_t seed);

struct SweepCell {
  std::size_t n = 0;
  double a = 0.0;
  bool proportional = false;  // on the a = heuristic_a(n, b) line
  DistanceEstimate jsd;
  std::optional<DistanceEstimate> tvd;
};

struct SweepGrid {
  std::vector<std::size_t> n_values;
  std::vector<double> noise_values;  // mixture weights a
  std::vector<SweepCell> cells;         // row-major: n_values x noise_values
  std::vector<SweepCell> proportional;  // one per n
  const SweepCell& at(std::size_t n_index, std::size_t noise_index) const {
    return cells.at(n_index * noise_values.size() + noise_index);
  }
};

struct SweepOptions {
  std::size_t n_samples = kDefaultSamples;
  std::uint64_t seed = 0;
  double b = kDefaultB;
  bool with_tvd = false;
  std::size_t threads = 1;
};

/// Distances on the leading n x n blocks of two pooled kernels over a grid of
/// stimulus counts and noise weights. Every cell uses the pair seed, so a
/// cell equals pairwise_matrix on the same sub-kernels and seed.
SweepGrid snr_sweep(const NamedKernel& pool1, const NamedKernel& pool2, std::span<const std::size_t> n_values,
                    std::span<const double> noise_values, const SweepOptions& options);

/// Noise variance (signal variance 1) to mixture weight: v / (1 + v).
double noise_variance_to_a(double variance);

struct StabilityOptions {
  std::size_t n_images = 100;
  std::size_t n_repeats = 100;
  std::vector<Metric> metrics{Metric::tvd, Metric::jsd};
  double b = kDefaultB;
  std::size_t n_samples = kDefaultSamples;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool rsa_squared = true;
  std::optional<std::vector<std::size_t>> forced_subset;  // same stimuli in every repeat
};

struct MetricStability {
  Metric metric = Metric::tvd;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // layer indices, i < j
  std::vector<double> pair_sd;  // sample SD across repeats, per pair
  std::vector<double> pair_mean;
  double median_sd = 0.0;
  double max_sd = 0.0;
};

struct StabilityReport {
  std::size_t n_images = 0;
  std::size_t n_repeats = 0;
  std::size_t pool_size = 0;
  Labels layers;
  double a = 0.0;
  std::vector<MetricStability> metrics;
};

/// Repeats pairwise_matrix on random stimulus subsets (uniform, without
/// replacement) with a = heuristic_a(n_images, b). Repeat r draws its subset
/// and its Monte-Carlo seed from derive_seed(seed, r).
StabilityReport stability_study(std::span<const NamedKernel> pooled, const StabilityOptions& options);

}  // namespace repmetric
