#pragma once

// Independent reference values for the Monte-Carlo distances: closed forms
// and adaptive Gauss-Kronrod quadrature of the defining integrals for
// zero-mean Gaussians with diagonal covariance in one or two dimensions.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// TVD between N(0, v1) and N(0, v2): the densities cross at ±x*, and
/// TVD = 2 (Φ(x*/σ_small) − Φ(x*/σ_large)).
inline double tvd_1d_closed(double v1, double v2) {
  if (v1 == v2) return 0.0;
  const double lo = std::min(v1, v2);
  const double hi = std::max(v1, v2);
  const double x_star = std::sqrt(std::log(hi / lo) * lo * hi / (hi - lo));
  return 2.0 * (normal_cdf(x_star / std::sqrt(lo)) - normal_cdf(x_star / std::sqrt(hi)));
}

inline double log_normal_1d(double x, double v) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * v) + x * x / v);
}

/// Integral of f over [breaks[0], breaks.back()], adaptively per piece.
template <typename F>
double integrate_pieces(F&& f, std::vector<double> breaks, double tol = 1e-12) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, breaks[i], breaks[i + 1], 15, tol);
  }
  return total;
}

/// Breakpoints at multiples of each scale, out to 14 of the largest scale.
inline std::vector<double> breakpoints(const std::vector<double>& sigmas) {
  const double outer = 14.0 * *std::max_element(sigmas.begin(), sigmas.end());
  std::vector<double> b{-outer, 0.0, outer};  // b[2] is the outer edge
  for (double s : sigmas) {
    for (double m : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0}) {
      if (m * s < outer) {
        b.push_back(m * s);
        b.push_back(-m * s);
      }
    }
  }
  return b;
}

/// ½|p1 − p2| given log densities.
inline double tvd_integrand(double l1, double l2) { return 0.5 * std::abs(std::exp(l1) - std::exp(l2)); }

/// JSD integrand in bits: ½ p1 log2(p1/m) + ½ p2 log2(p2/m) with m = (p1+p2)/2.
inline double jsd_integrand(double l1, double l2) {
  const double hi = std::max(l1, l2);
  const double log_m = hi + std::log1p(std::exp(std::min(l1, l2) - hi)) - std::numbers::ln2;
  return 0.5 * (std::exp(l1) * (l1 - log_m) + std::exp(l2) * (l2 - log_m)) / std::numbers::ln2;
}

/// Integrates `integrand(l1, l2)` for diagonal Gaussians with variances v1,
/// v2 (one or two dimensions).
template <typename Integrand>
double integrate_diag(const std::vector<double>& v1, const std::vector<double>& v2, Integrand integrand) {
  if (v1.size() == 1) {
    const auto b = breakpoints({std::sqrt(v1[0]), std::sqrt(v2[0])});
    return integrate_pieces(
        [&](double x) { return integrand(log_normal_1d(x, v1[0]), log_normal_1d(x, v2[0])); }, b);
  }
  // Nested rule; fine for smooth integrands (JSD), slow across the TVD kink.
  const auto bx = breakpoints({std::sqrt(v1[0]), std::sqrt(v2[0])});
  const auto by = breakpoints({std::sqrt(v1[1]), std::sqrt(v2[1])});
  return integrate_pieces(
      [&](double x) {
        const double lx1 = log_normal_1d(x, v1[0]);
        const double lx2 = log_normal_1d(x, v2[0]);
        return integrate_pieces(
            [&](double y) { return integrand(lx1 + log_normal_1d(y, v1[1]), lx2 + log_normal_1d(y, v2[1])); }, by,
            1e-11);
      },
      bx, 1e-10);
}

/// TVD = P1(B) − P2(B) with B = {p1 > p2}. In 2-D the inner integral over y
/// is a Gaussian probability of |y| above or below a threshold.
inline double tvd_quadrature(const std::vector<double>& v1, const std::vector<double>& v2) {
  if (v1.size() == 1) return integrate_diag(v1, v2, tvd_integrand);
  const double c0 = -0.5 * (std::log(v1[0] / v2[0]) + std::log(v1[1] / v2[1]));
  const double alpha = -0.5 * (1.0 / v1[0] - 1.0 / v2[0]);
  const double beta = -0.5 * (1.0 / v1[1] - 1.0 / v2[1]);
  auto prob_b = [&](double g, double v) {  // P(g + βy² > 0) for y ~ N(0, v)
    if (beta == 0.0) return g > 0.0 ? 1.0 : 0.0;
    const double t2 = -g / beta;
    if (beta > 0.0) return t2 <= 0.0 ? 1.0 : std::erfc(std::sqrt(t2 / (2.0 * v)));
    return t2 <= 0.0 ? 0.0 : std::erf(std::sqrt(t2 / (2.0 * v)));
  };
  auto b = breakpoints({std::sqrt(v1[0]), std::sqrt(v2[0])});
  if (alpha != 0.0 && -c0 / alpha > 0.0) {
    const double r = std::sqrt(-c0 / alpha);
    if (r < b[2]) b.insert(b.end(), {r, -r});
  }
  return integrate_pieces(
      [&](double x) {
        const double g = c0 + alpha * x * x;
        return std::exp(log_normal_1d(x, v1[0])) * prob_b(g, v1[1]) - std::exp(log_normal_1d(x, v2[0])) * prob_b(g, v2[1]);
      },
      b);
}

inline double jsd_quadrature(const std::vector<double>& v1, const std::vector<double>& v2) {
  return integrate_diag(v1, v2, jsd_integrand);
}

}  // namespace oracle
