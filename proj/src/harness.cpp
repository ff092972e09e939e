#include "repmetric/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "repmetric/baseline_metrics.hpp"
#include "repmetric/detail/parallel.hpp"
#include "repmetric/errors.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {
namespace {

[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string what = context + ": " + e.what();
  switch (e.kind()) {
    case ErrorKind::usage: throw UsageError(what);
    case ErrorKind::validation: throw ValidationError(what);
    case ErrorKind::numerical: throw NumericalError(what);
  }
  throw ValidationError(what);
}

std::string pair_context(std::string_view a, std::string_view b) {
  return "pair (" + std::string(a) + ", " + std::string(b) + ")";
}

void check_layers(std::span<const NamedKernel> layers) {
  if (layers.size() < 2) throw ValidationError("need at least 2 layers to compare");
  std::set<std::string> names;
  for (const auto& layer : layers) {
    if (!names.insert(layer.name).second) throw ValidationError("duplicate layer name '" + layer.name + "'");
    if (layer.kernel.size() != layers.front().kernel.size()) {
      throw ValidationError("mixed stimulus counts: layer '" + layer.name + "' has " +
                            std::to_string(layer.kernel.size()) + " stimuli, layer '" + layers.front().name +
                            "' has " + std::to_string(layers.front().kernel.size()));
    }
  }
}

double baseline_value(Metric metric, const Matrix& k1, const Matrix& k2, bool rsa_squared) {
  switch (metric) {
    case Metric::cka_distance: return cka_distance(k1, k2).value;
    case Metric::shape_metric: return shape_metric(k1, k2).value;
    case Metric::rsa_one_minus_corr: return rsa_one_minus_corr(k1, k2, rsa_squared).value;
    case Metric::rsa_arccos: return rsa_arccos(k1, k2, rsa_squared).value;
    default: break;
  }
  throw ValidationError("not a baseline metric");
}

const DistanceEstimate& pick(const PairEstimates& e, Metric metric) {
  switch (metric) {
    case Metric::tvd: return e.tvd;
    case Metric::jsd: return e.jsd;
    default: return e.js_distance;
  }
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

double sample_sd(const std::vector<double>& values, double& mean_out) {
  const double n = static_cast<double>(values.size());
  mean_out = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : values) ss += (v - mean_out) * (v - mean_out);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

double heuristic_a(std::size_t n, double b) {
  if (!(b >= 0.0)) throw ValidationError("b must be nonnegative");
  const double bn = b * static_cast<double>(n);
  return bn / (1.0 + bn);
}

double noise_variance_to_a(double variance) {
  if (!(variance >= 0.0)) throw ValidationError("noise variance must be nonnegative");
  if (std::isinf(variance)) return 1.0;
  return variance / (1.0 + variance);
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::tvd: return "tvd";
    case Metric::jsd: return "jsd";
    case Metric::js_distance: return "js_distance";
    case Metric::cka_distance: return "cka";
    case Metric::shape_metric: return "shape";
    case Metric::rsa_one_minus_corr: return "rsa_corr";
    case Metric::rsa_arccos: return "rsa_arccos";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  for (auto m : {Metric::tvd, Metric::jsd, Metric::js_distance, Metric::cka_distance, Metric::shape_metric,
                 Metric::rsa_one_minus_corr, Metric::rsa_arccos}) {
    if (metric_name(m) == name) return m;
  }
  throw UsageError("unknown metric '" + std::string(name) +
                   "' (expected tvd, jsd, js_distance, cka, shape, rsa_corr or rsa_arccos)");
}

std::vector<Metric> parse_metric_list(std::string_view text) {
  std::vector<Metric> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    if (!item.empty()) {
      const auto m = parse_metric(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw UsageError("no metrics given");
  return out;
}

bool is_bayes(Metric metric) {
  return metric == Metric::tvd || metric == Metric::jsd || metric == Metric::js_distance;
}

std::vector<NamedKernel> load_kernels(const LayerManifest& manifest) {
  std::vector<NamedKernel> out;
  out.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const auto path = manifest.resolve(entry);
    auto m = read_matrix(path, entry.kind);
    NamedKernel layer;
    layer.name = entry.name;
    try {
      if (entry.kind == MatrixKind::representation) {
        layer.kernel = gram(RepresentationMatrix{std::move(m.values), std::move(m.labels)});
      } else {
        layer.kernel = KernelMatrix{std::move(m.values), std::move(m.labels)};
        validate_kernel(layer.kernel);
      }
    } catch (const Error& e) {
      rethrow_with_context(e, "layer '" + entry.name + "' (" + path.string() + ")");
    }
    out.push_back(std::move(layer));
  }
  return out;
}

std::uint64_t pair_seed(std::uint64_t seed, std::string_view label1, std::string_view label2) {
  const auto [lo, hi] = std::minmax(label1, label2);
  std::uint64_t h = fnv1a64(lo);
  h = fnv1a64(std::string_view("\0", 1), h);
  h = fnv1a64(hi, h);
  return derive_seed(seed, h);
}

PairEstimates pair_estimates(const NamedKernel& first, const NamedKernel& second, double a, std::size_t n_samples,
                             std::uint64_t seed) {
  const bool swap = second.name < first.name;
  const auto& lo = swap ? second : first;
  const auto& hi = swap ? first : second;
  try {
    const GaussianModel p_lo(predictive_covariance(lo.kernel, a));
    const GaussianModel p_hi(predictive_covariance(hi.kernel, a));
    return estimate_pair(p_lo, p_hi, n_samples, pair_seed(seed, lo.name, hi.name));
  } catch (const Error& e) {
    rethrow_with_context(e, pair_context(lo.name, hi.name));
  }
}

std::map<Metric, DistanceMatrix> pairwise_matrix(std::span<const NamedKernel> layers, const PairwiseOptions& options) {
  check_layers(layers);
  if (options.metrics.empty()) throw UsageError("no metrics requested");
  if (options.n_samples < 2) throw ValidationError("need at least 2 samples per distribution");
  const auto m = layers.size();
  const bool any_bayes = std::any_of(options.metrics.begin(), options.metrics.end(), is_bayes);

  // One Gaussian model per layer, built once and shared read-only by all pairs.
  std::vector<std::optional<GaussianModel>> models(m);
  std::vector<std::string> model_errors(m);
  std::vector<ErrorKind> model_error_kinds(m, ErrorKind::validation);
  if (any_bayes) {
    detail::parallel_for(m, options.threads, [&](std::size_t i) {
      try {
        models[i].emplace(predictive_covariance(layers[i].kernel, options.a));
      } catch (const Error& e) {
        model_errors[i] = "layer '" + layers[i].name + "': " + e.what();
        model_error_kinds[i] = e.kind();
      }
    });
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);

  struct PairResult {
    std::vector<double> values;
    std::vector<double> errors;
    std::string failure;
  };
  std::vector<PairResult> results(pairs.size());

  detail::parallel_for(pairs.size(), options.threads, [&](std::size_t p) {
    auto [i, j] = pairs[p];
    if (layers[j].name < layers[i].name) std::swap(i, j);  // canonical order by label
    auto& out = results[p];
    try {
      std::optional<PairEstimates> est;
      if (any_bayes) {
        for (auto idx : {i, j}) {
          if (!models[idx]) {
            throw Error(model_error_kinds[idx], model_errors[idx]);
          }
        }
        est = estimate_pair(*models[i], *models[j], options.n_samples,
                            pair_seed(options.seed, layers[i].name, layers[j].name));
      }
      for (const auto metric : options.metrics) {
        if (is_bayes(metric)) {
          const auto& e = pick(*est, metric);
          out.values.push_back(e.value);
          out.errors.push_back(e.std_error);
        } else {
          out.values.push_back(
              baseline_value(metric, layers[i].kernel.values, layers[j].kernel.values, options.rsa_squared));
          out.errors.push_back(0.0);
        }
      }
    } catch (const Error& e) {
      if (options.on_error == FailurePolicy::abort) rethrow_with_context(e, pair_context(layers[i].name, layers[j].name));
      out.failure = pair_context(layers[i].name, layers[j].name) + ": " + e.what();
      out.values.clear();
      out.errors.clear();
    }
  });

  Labels labels;
  for (const auto& layer : layers) labels.push_back(layer.name);
  std::map<Metric, DistanceMatrix> out;
  for (std::size_t k = 0; k < options.metrics.size(); ++k) {
    DistanceMatrix dm;
    dm.metric = options.metrics[k];
    dm.labels = labels;
    dm.values = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    dm.std_errors = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto i = static_cast<Eigen::Index>(pairs[p].first);
      const auto j = static_cast<Eigen::Index>(pairs[p].second);
      if (!results[p].failure.empty()) {
        dm.values(i, j) = dm.values(j, i) = std::numeric_limits<double>::quiet_NaN();
        dm.holes.push_back(pairs[p]);
        continue;
      }
      dm.values(i, j) = dm.values(j, i) = results[p].values[k];
      dm.std_errors(i, j) = dm.std_errors(j, i) = results[p].errors[k];
    }
    out.emplace(dm.metric, std::move(dm));
  }
  return out;
}

SweepGrid snr_sweep(const NamedKernel& pool1, const NamedKernel& pool2, std::span<const std::size_t> n_values,
                    std::span<const double> noise_values, const SweepOptions& options) {
  if (pool1.kernel.size() != pool2.kernel.size()) throw ValidationError("kernel pools cover different stimulus counts");
  if (pool1.name == pool2.name) throw ValidationError("sweep needs two distinct layer names");
  if (n_values.empty()) throw UsageError("no stimulus counts given");
  for (auto n : n_values) {
    if (n < 1) throw ValidationError("stimulus counts must be positive");
    if (n > static_cast<std::size_t>(pool1.kernel.size())) {
      throw ValidationError("n = " + std::to_string(n) + " exceeds the pool of " +
                            std::to_string(pool1.kernel.size()) + " stimuli");
    }
  }
  for (auto a : noise_values)
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("noise weights a must lie in [0, 1]");

  SweepGrid grid;
  grid.n_values.assign(n_values.begin(), n_values.end());
  grid.noise_values.assign(noise_values.begin(), noise_values.end());
  const auto per_row = noise_values.size() + 1;  // last column: proportional line

  std::vector<SweepCell> flat(n_values.size() * per_row);
  detail::parallel_for(flat.size(), options.threads, [&](std::size_t c) {
    const auto ni = c / per_row;
    const auto ki = c % per_row;
    const auto n = n_values[ni];
    SweepCell cell;
    cell.n = n;
    cell.proportional = ki == noise_values.size();
    cell.a = cell.proportional ? heuristic_a(n, options.b) : noise_values[ki];
    const NamedKernel sub1{pool1.name, leading_submatrix(pool1.kernel, n)};
    const NamedKernel sub2{pool2.name, leading_submatrix(pool2.kernel, n)};
    const auto est = pair_estimates(sub1, sub2, cell.a, options.n_samples, options.seed);
    cell.jsd = est.jsd;
    if (options.with_tvd) cell.tvd = est.tvd;
    flat[c] = std::move(cell);
  });

  for (std::size_t c = 0; c < flat.size(); ++c) {
    if (c % per_row == noise_values.size()) {
      grid.proportional.push_back(std::move(flat[c]));
    } else {
      grid.cells.push_back(std::move(flat[c]));
    }
  }
  return grid;
}

StabilityReport stability_study(std::span<const NamedKernel> pooled, const StabilityOptions& options) {
  check_layers(pooled);
  const auto pool_size = static_cast<std::size_t>(pooled.front().kernel.size());
  if (options.n_repeats < 2) throw UsageError("stability study needs at least 2 repeats");
  if (options.n_images < 2 || options.n_images > pool_size) {
    throw ValidationError("n_images must lie in [2, " + std::to_string(pool_size) + "]");
  }
  if (options.forced_subset && options.forced_subset->size() != options.n_images) {
    throw ValidationError("forced subset size differs from n_images");
  }

  StabilityReport report;
  report.n_images = options.n_images;
  report.n_repeats = options.n_repeats;
  report.pool_size = pool_size;
  report.a = heuristic_a(options.n_images, options.b);
  for (const auto& layer : pooled) report.layers.push_back(layer.name);

  const auto m = pooled.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) pairs.emplace_back(i, j);

  // samples[metric][pair][repeat]
  std::vector<std::vector<std::vector<double>>> samples(
      options.metrics.size(), std::vector<std::vector<double>>(pairs.size()));

  std::vector<std::size_t> all(pool_size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t r = 0; r < options.n_repeats; ++r) {
    const auto repeat_seed = derive_seed(options.seed, r);
    std::vector<std::size_t> subset;
    if (options.forced_subset) {
      subset = *options.forced_subset;
    } else {
      std::mt19937_64 engine(derive_seed(repeat_seed, 0));
      std::sample(all.begin(), all.end(), std::back_inserter(subset), options.n_images, engine);
    }

    std::vector<NamedKernel> sub;
    sub.reserve(m);
    for (const auto& layer : pooled) sub.push_back({layer.name, principal_submatrix(layer.kernel, subset)});

    PairwiseOptions po;
    po.metrics = options.metrics;
    po.a = report.a;
    po.n_samples = options.n_samples;
    po.seed = derive_seed(repeat_seed, 1);
    po.threads = options.threads;
    po.rsa_squared = options.rsa_squared;
    const auto matrices = pairwise_matrix(sub, po);
    for (std::size_t k = 0; k < options.metrics.size(); ++k) {
      const auto& dm = matrices.at(options.metrics[k]);
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        samples[k][p].push_back(
            dm.values(static_cast<Eigen::Index>(pairs[p].first), static_cast<Eigen::Index>(pairs[p].second)));
      }
    }
  }

  for (std::size_t k = 0; k < options.metrics.size(); ++k) {
    MetricStability ms;
    ms.metric = options.metrics[k];
    ms.pairs = pairs;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      double mean = 0.0;
      ms.pair_sd.push_back(sample_sd(samples[k][p], mean));
      ms.pair_mean.push_back(mean);
    }
    ms.median_sd = median(ms.pair_sd);
    ms.max_sd = *std::max_element(ms.pair_sd.begin(), ms.pair_sd.end());
    report.metrics.push_back(std::move(ms));
  }
  return report;
}

}  // namespace repmetric
