#include "repmetric/bayes_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "repmetric/errors.hpp"
#include "repmetric/rng.hpp"

namespace repmetric {
namespace {

// Log ratios below this fraction of the magnitude of the terms that produced
// them are indistinguishable from rounding error.
constexpr double kLogRatioResolution = 1e-11;

struct Direction {
  Matrix z;      // N x n standard draws of the sampled model
  Matrix w;      // n x N, L_other^{-1} L_sampled zᵀ
  Vector delta;  // log p_other(x) - log p_sampled(x)
};

// Draws from `sampled` and evaluates the log ratio against `other`.
Direction evaluate_direction(const GaussianModel& sampled, const GaussianModel& other, std::size_t n_draws,
                             std::uint64_t seed, std::uint64_t stream) {
  Direction d;
  d.z = standard_normal_block(n_draws, sampled.dim(), seed, stream);
  const auto n = static_cast<Eigen::Index>(n_draws);
  d.delta.resize(n);

  if (sampled.cholesky() == other.cholesky()) {
    d.w = d.z.transpose();
    d.delta.setZero();
    return d;
  }

  const Matrix x_t = sampled.cholesky().triangularView<Eigen::Lower>() * d.z.transpose();
  d.w = other.cholesky().triangularView<Eigen::Lower>().solve(x_t);
  const double half_logdet = 0.5 * (sampled.log_det() - other.log_det());
  const double logdet_scale = 0.5 * (std::abs(sampled.log_det()) + std::abs(other.log_det()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zz = d.z.row(i).squaredNorm();
    const double ww = d.w.col(i).squaredNorm();
    const double delta = half_logdet + 0.5 * (zz - ww);
    const double scale = logdet_scale + 0.5 * (zz + ww);
    d.delta(i) = std::abs(delta) <= kLogRatioResolution * scale ? 0.0 : delta;
  }
  return d;
}

void check_pair(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws) {
  if (p1.dim() != p2.dim()) {
    throw ValidationError("dimension mismatch: " + std::to_string(p1.dim()) + " vs " + std::to_string(p2.dim()));
  }
  if (n_draws < 2) throw ValidationError("need at least 2 draws per distribution");
}

double tvd_term(double delta) { return delta < 0.0 ? -std::expm1(delta) : 0.0; }

double tvd_term_slope(double delta) { return delta < 0.0 ? -std::exp(delta) : 0.0; }

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// -log2 p_s / (p_s + p_o) for log ratio delta = log p_o - log p_s.
double jsd_term(double delta) { return delta == 0.0 ? 1.0 : softplus(delta) / std::numbers::ln2; }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

DistanceEstimate summarize(const Vector& summands, BayesMetric metric, std::uint64_t seed) {
  const auto n = summands.size();
  const double mean = summands.mean();
  const double var = (summands.array() - mean).square().sum() / static_cast<double>(n - 1);
  DistanceEstimate e;
  e.raw_value = mean;
  e.value = std::clamp(mean, 0.0, 1.0);
  e.summand_variance = var;
  e.std_error = std::sqrt(var / static_cast<double>(n));
  e.n_samples = static_cast<std::size_t>(n);
  e.metric = metric;
  e.seed = seed;
  return e;
}

DistanceEstimate tvd_from(const LogRatios& r, std::uint64_t seed) {
  Vector s(r.forward.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = 0.5 * (tvd_term(r.forward(i)) + tvd_term(r.backward(i)));
  return summarize(s, BayesMetric::tvd, seed);
}

DistanceEstimate jsd_from(const LogRatios& r, std::uint64_t seed) {
  Vector s(r.forward.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = 1.0 - 0.5 * (jsd_term(r.forward(i)) + jsd_term(r.backward(i)));
  return summarize(s, BayesMetric::jsd, seed);
}

// Maps a gradient with respect to the lower Cholesky factor L of C = L Lᵀ to
// the symmetric gradient with respect to C: L^{-T} sym(Φ(Lᵀ L̄)) L^{-1},
// where Φ keeps the lower triangle and halves the diagonal.
Matrix cholesky_backward(const Matrix& lower, const Matrix& lower_bar) {
  const Matrix bar = lower_bar.triangularView<Eigen::Lower>();
  const Matrix product = lower.transpose() * bar;
  Matrix phi = product.triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  const Matrix sym = 0.5 * (phi + phi.transpose());
  const auto lt = lower.triangularView<Eigen::Lower>().transpose();
  const Matrix left = lt.solve(sym);
  Matrix grad = lt.solve(left.transpose()).transpose();
  return 0.5 * (grad + grad.transpose());
}

// Adds the contribution of Σ_i g_i ∂delta_i to the factor gradients, where
// delta_i = log p_o(x_i) - log p_s(x_i) and x_i = L_s z_i.
void accumulate_direction(const Direction& d, const Vector& weights, const GaussianModel& sampled,
                          const GaussianModel& other, Matrix& bar_sampled, Matrix& bar_other) {
  const double total = weights.sum();
  const Matrix weighted_w = d.w * weights.asDiagonal();
  const auto lo_t = other.cholesky().triangularView<Eigen::Lower>().transpose();

  bar_sampled.diagonal().array() += total / sampled.cholesky().diagonal().array();
  bar_sampled -= lo_t.solve(weighted_w * d.z);

  bar_other.diagonal().array() -= total / other.cholesky().diagonal().array();
  bar_other += lo_t.solve(weighted_w * d.w.transpose());
}

template <typename Slope>
DistanceGradient gradient(const Matrix& cov1, const Matrix& cov2, std::size_t n_draws, std::uint64_t seed,
                          StreamPair streams, Slope slope) {
  const auto p1 = GaussianModel::from_covariance(cov1);
  const auto p2 = GaussianModel::from_covariance(cov2);
  check_pair(p1, p2, n_draws);
  const auto fwd = evaluate_direction(p1, p2, n_draws, seed, streams.first);
  const auto bwd = evaluate_direction(p2, p1, n_draws, seed, streams.second);

  // Estimate = const + (1/2N) Σ_i [h(fwd_i) + h(bwd_i)].
  const double scale = 0.5 / static_cast<double>(n_draws);
  const Vector g_fwd = fwd.delta.unaryExpr([&](double d) { return scale * slope(d); });
  const Vector g_bwd = bwd.delta.unaryExpr([&](double d) { return scale * slope(d); });

  const auto n = p1.dim();
  Matrix bar1 = Matrix::Zero(n, n);
  Matrix bar2 = Matrix::Zero(n, n);
  accumulate_direction(fwd, g_fwd, p1, p2, bar1, bar2);
  accumulate_direction(bwd, g_bwd, p2, p1, bar2, bar1);

  return {cholesky_backward(p1.cholesky(), bar1), cholesky_backward(p2.cholesky(), bar2), seed};
}

}  // namespace

std::string_view to_string(BayesMetric metric) {
  switch (metric) {
    case BayesMetric::tvd: return "tvd";
    case BayesMetric::jsd: return "jsd";
    case BayesMetric::js_distance: return "js_distance";
  }
  return "unknown";
}

LogRatios log_ratios(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws, std::uint64_t seed,
                     StreamPair streams) {
  check_pair(p1, p2, n_draws);
  return {evaluate_direction(p1, p2, n_draws, seed, streams.first).delta,
          evaluate_direction(p2, p1, n_draws, seed, streams.second).delta};
}

PairEstimates estimate_pair(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws,
                            std::uint64_t seed, StreamPair streams) {
  const auto r = log_ratios(p1, p2, n_draws, seed, streams);
  PairEstimates out;
  out.tvd = tvd_from(r, seed);
  out.jsd = jsd_from(r, seed);
  out.js_distance = js_distance_from(out.jsd);
  return out;
}

DistanceEstimate tvd(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws, std::uint64_t seed,
                     StreamPair streams) {
  return tvd_from(log_ratios(p1, p2, n_draws, seed, streams), seed);
}

DistanceEstimate jsd(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws, std::uint64_t seed,
                     StreamPair streams) {
  return jsd_from(log_ratios(p1, p2, n_draws, seed, streams), seed);
}

DistanceEstimate js_distance(const GaussianModel& p1, const GaussianModel& p2, std::size_t n_draws,
                             std::uint64_t seed, StreamPair streams) {
  return js_distance_from(jsd(p1, p2, n_draws, seed, streams));
}

DistanceEstimate js_distance_from(const DistanceEstimate& jsd_estimate) {
  DistanceEstimate e = jsd_estimate;
  e.metric = BayesMetric::js_distance;
  const double d = jsd_estimate.value;
  const double se = jsd_estimate.std_error;
  e.value = std::sqrt(d);
  e.raw_value = std::sqrt(std::max(jsd_estimate.raw_value, 0.0));
  if (d > se) {
    e.std_error = se / (2.0 * e.value);
    e.se_degenerate = false;
  } else {
    e.std_error = std::sqrt(se);
    e.se_degenerate = true;
  }
  e.summand_variance = e.std_error * e.std_error * static_cast<double>(e.n_samples);
  return e;
}

DistanceGradient tvd_gradient(const Matrix& cov1, const Matrix& cov2, std::size_t n_draws, std::uint64_t seed,
                              StreamPair streams) {
  return gradient(cov1, cov2, n_draws, seed, streams, tvd_term_slope);
}

DistanceGradient jsd_gradient(const Matrix& cov1, const Matrix& cov2, std::size_t n_draws, std::uint64_t seed,
                              StreamPair streams) {
  // d/dδ of -log2(1 + e^δ) / 2 per direction is folded into the 1/2N scale.
  return gradient(cov1, cov2, n_draws, seed, streams,
                  [](double d) { return -logistic(d) / std::numbers::ln2; });
}

std::vector<VarianceProfilePoint> estimator_variance_profile(std::span<const std::pair<Matrix, Matrix>> pairs,
                                                             BayesMetric metric, std::size_t n_draws,
                                                             std::uint64_t seed) {
  if (pairs.empty()) throw ValidationError("variance profile needs at least one pair");
  std::vector<VarianceProfilePoint> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto p1 = GaussianModel::from_covariance(pairs[i].first);
    const auto p2 = GaussianModel::from_covariance(pairs[i].second);
    const auto est = estimate_pair(p1, p2, n_draws, derive_seed(seed, i));
    const auto& chosen = metric == BayesMetric::tvd ? est.tvd : metric == BayesMetric::jsd ? est.jsd : est.js_distance;
    out.push_back({chosen.value, chosen.summand_variance});
  }
  return out;
}

}  // namespace repmetric
