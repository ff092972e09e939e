// Acceptance checks, one line per criterion. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "cli.hpp"
#include "repmetric/baseline_metrics.hpp"
#include "repmetric/bayes_metrics.hpp"
#include "repmetric/harness.hpp"
#include "repmetric/matrix_io.hpp"
#include "repmetric/mds.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace repmetric;
using testing_support::gaussian_matrix;
using testing_support::kernel_of;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {  // average ranks over ties
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) { return pearson(ranks(a), ranks(b)); }

GaussianModel diag_model(const std::vector<double>& v) {
  return GaussianModel::from_covariance(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).asDiagonal());
}

GaussianModel layer_model(const Matrix& x, double a) { return GaussianModel(predictive_covariance(kernel_of(x), a)); }

// 1. Monte-Carlo TVD and JSD against quadrature in one and two dimensions.
Outcome oracle_equivalence() {
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (double r : {1.5, 2.0, 4.0, 8.0, 16.0, 50.0, 100.0, 400.0, 1000.0, 3000.0, 1e4}) pairs.push_back({{1.0}, {r}});
  pairs.push_back({{10.0}, {1.0}});
  pairs.push_back({{1.0, 1.0}, {4.0, 4.0}});
  pairs.push_back({{1.0, 1.0}, {25.0, 25.0}});
  pairs.push_back({{1.0, 1.0}, {1.0, 10.0}});
  pairs.push_back({{1.0, 1.0}, {10.0, 100.0}});
  pairs.push_back({{1.0, 1.0}, {2.0, 50.0}});
  pairs.push_back({{1.0, 1.0}, {100.0, 1.0}});
  pairs.push_back({{1.0, 1.0}, {3.0, 3000.0}});
  pairs.push_back({{1.0, 1.0}, {0.1, 30.0}});
  pairs.push_back({{5.0, 0.2}, {0.2, 5.0}});
  pairs.push_back({{1.0, 1.0}, {1e4, 1e4}});

  Outcome o;
  double worst = 0.0;
  std::uint64_t seed = 1000;
  for (const auto& [v1, v2] : pairs) {
    const auto e = estimate_pair(diag_model(v1), diag_model(v2), 100000, seed++);
    const double zt = std::abs(e.tvd.value - oracle::tvd_quadrature(v1, v2)) / e.tvd.std_error;
    const double zj = std::abs(e.jsd.value - oracle::jsd_quadrature(v1, v2)) / e.jsd.std_error;
    worst = std::max({worst, zt, zj});
  }
  const auto e14 = tvd(diag_model({1.0}), diag_model({4.0}), 100000, 7);
  const double closed = oracle::tvd_1d_closed(1.0, 4.0);
  const double z14 = std::abs(e14.value - closed) / e14.std_error;
  o.pass = worst <= 4.0 && z14 <= 4.0;
  o.detail = fmt("%zu pairs, worst |MC - quadrature| = %.2f SE; TVD(1,4) = %.4f vs %.4f (%.2f SE)", pairs.size(), worst,
                 e14.value, closed, z14);
  return o;
}

// 2. Largest single-summand variance over a sweep of 1-D variance ratios.
Outcome estimator_precision() {
  std::vector<std::pair<Matrix, Matrix>> sweep;
  std::vector<double> ratios;
  for (double r = 1.0; r <= 1e8; r *= 1.2) {
    sweep.emplace_back(Matrix::Ones(1, 1), Matrix::Constant(1, 1, r));
    ratios.push_back(r);
  }
  const auto j = estimator_variance_profile(sweep, BayesMetric::jsd, 100000, 11);
  const auto t = estimator_variance_profile(sweep, BayesMetric::tvd, 100000, 12);
  std::size_t bj = 0, bt = 0;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (j[i].summand_variance > j[bj].summand_variance) bj = i;
    if (t[i].summand_variance > t[bt].summand_variance) bt = i;
  }
  const double vj = j[bj].summand_variance;
  const double vt = t[bt].summand_variance;
  const double sdj = std::sqrt(vj / 10000.0);
  const double sdt = std::sqrt(vt / 10000.0);
  Outcome o;
  o.pass = vj <= 0.40 && vt <= 0.10 && sdj <= 0.0063 && sdt <= 0.0032;
  o.detail = fmt("peak variance JSD %.3f at ratio %.3g, TVD %.4f at ratio %.3g; SD at N=10000: %.4f, %.4f", vj,
                 ratios[bj], vt, ratios[bt], sdj, sdt);
  return o;
}

// 3. Rotations and rescalings are invisible, shifts are not.
Outcome equivalence_classes() {
  std::mt19937_64 rng(31);
  const double a = heuristic_a(30, kDefaultB);
  int bad_invariant = 0, bad_shift = 0, checks = 0;
  double worst_ratio = 0.0, weakest_shift = INFINITY;
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index k = rep % 2 ? 500 : 5;
    const Matrix x = gaussian_matrix(30, k, rng);
    const auto base = layer_model(x, a);
    std::vector<Matrix> same{x * testing_support::random_orthogonal(k, rng), -2.0 * x, 0.1 * x, 7.0 * x};
    std::uint64_t seed = 5000 + 10 * static_cast<std::uint64_t>(rep);
    for (const auto& y : same) {
      const auto e = estimate_pair(base, layer_model(y, a), 10000, seed++);
      for (const auto* d : {&e.tvd, &e.jsd, &e.js_distance}) {
        ++checks;
        if (d->value > 3.0 * d->std_error) ++bad_invariant;
        if (d->std_error > 0) worst_ratio = std::max(worst_ratio, d->value / d->std_error);
      }
    }
    Matrix shifted = x;
    shifted.rowwise() += gaussian_matrix(1, k, rng).row(0);
    const auto s = estimate_pair(base, layer_model(shifted, a), 10000, seed++);
    for (const auto* d : {&s.tvd, &s.jsd, &s.js_distance}) {
      if (!(d->value > 10.0 * d->std_error)) ++bad_shift;
      weakest_shift = std::min(weakest_shift, d->value / d->std_error);
    }
  }
  Outcome o;
  o.pass = bad_invariant == 0 && bad_shift == 0;
  o.detail = fmt("%d invariance checks, %d above 3 SE (max %.2f SE); shifts: %d below 10 SE (min %.1f SE)", checks,
                 bad_invariant, worst_ratio, bad_shift, weakest_shift);
  return o;
}

// 4. Reparameterization gradients against central differences.
Outcome gradient_checks() {
  std::mt19937_64 rng(41);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix c1 = testing_support::random_spd(3, rng);
    const Matrix c2 = testing_support::random_spd(3, rng);
    const Matrix r = gaussian_matrix(3, 3, rng);
    const Matrix dir = 0.5 * (r + r.transpose());
    const std::uint64_t seed = 700 + static_cast<std::uint64_t>(rep);
    for (auto metric : {BayesMetric::tvd, BayesMetric::jsd}) {
      const auto g = metric == BayesMetric::tvd ? tvd_gradient(c1, c2, 20000, seed) : jsd_gradient(c1, c2, 20000, seed);
      // TVD is piecewise smooth in each draw; a narrow stencil stays on one piece.
      const double h = (metric == BayesMetric::tvd ? 1e-8 : 1e-5) * c1.norm();
      for (bool first : {true, false}) {
        auto at = [&](double s) {
          const Matrix a1 = first ? Matrix(c1 + s * dir) : c1;
          const Matrix a2 = first ? c2 : Matrix(c2 + s * dir);
          const auto e = estimate_pair(GaussianModel::from_covariance(a1), GaussianModel::from_covariance(a2), 20000, seed);
          return metric == BayesMetric::tvd ? e.tvd.raw_value : e.jsd.raw_value;
        };
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        const double analytic = (first ? g.d_cov1 : g.d_cov2).cwiseProduct(dir).sum();
        worst = std::max(worst, std::abs(analytic - fd) / std::abs(fd));
      }
    }
  }
  Outcome o;
  o.pass = worst <= 1e-4;
  o.detail = fmt("10 pairs x {TVD, JSD} x {C1, C2}: worst relative error %.2e", worst);
  return o;
}

// 5. Noise-weight heuristic.
Outcome heuristic_constants() {
  const double a100 = heuristic_a(100, 1.0 / 100.0);
  const double a200 = heuristic_a(200, 1.0 / 100.0);
  Outcome o;
  o.pass = a100 == 0.5 && a200 == 2.0 / 3.0;
  o.detail = fmt("a(100) = %.17g, a(200) = %.17g", a100, a200);
  return o;
}

// Layers over a pool of 1000 stimuli sharing `rank` latent factors.
std::vector<NamedKernel> family(std::size_t layers, Eigen::Index rank, Eigen::Index width, double noise,
                                std::uint64_t seed) {
  return testing_support::named_kernels(
      testing_support::latent_layer_family(layers, 1000, rank, width, noise, seed).layers);
}

// 6. JSD is flat along the proportional-noise line and grows with n at fixed noise.
Outcome sweep_shape() {
  std::vector<std::size_t> ns;
  for (std::size_t n = 100; n <= 1000; n += 100) ns.push_back(n);
  const std::vector<double> fixed{0.1};
  Outcome o;
  std::string detail;
  for (const auto& [rank, seed] : {std::pair<Eigen::Index, std::uint64_t>{5, 7}, {8, 8}}) {
    const auto pools = family(2, rank, 20, 0.05, seed);
    SweepOptions opts;
    opts.n_samples = kDefaultSamples;
    opts.seed = 1;
    const auto grid = snr_sweep(pools[0], pools[1], ns, fixed, opts);
    std::vector<double> n_axis, at_fixed, along;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      n_axis.push_back(static_cast<double>(ns[i]));
      at_fixed.push_back(grid.at(i, 0).jsd.value);
      along.push_back(grid.proportional[i].jsd.value);
    }
    const double spread = *std::max_element(along.begin(), along.end()) - *std::min_element(along.begin(), along.end());
    const double rho = spearman(n_axis, at_fixed);
    o.pass = o.pass && spread < 0.15 && rho >= 0.9;
    detail += fmt("%srank %d: proportional spread %.3f, fixed-a Spearman %.3f (JSD %.3f -> %.3f)", detail.empty() ? "" : "; ",
                  static_cast<int>(rank), spread, rho, at_fixed.front(), at_fixed.back());
  }
  o.detail = detail;
  return o;
}

// 8. TVD and JS distance agree across many pairs.
Outcome agreement() {
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> log_t(std::log(0.03), std::log(3.0));
  std::vector<double> tv, js;
  for (int rep = 0; rep < 120; ++rep) {
    const Eigen::Index n = 20;
    const Eigen::Index k = rep % 3 == 0 ? 5 : 15;
    const Matrix x1 = gaussian_matrix(n, k, rng);
    const Matrix x2 = x1 + gaussian_matrix(n, k, rng, std::exp(log_t(rng)));
    const double a = heuristic_a(n, kDefaultB);
    const auto e = estimate_pair(layer_model(x1, a), layer_model(x2, a), 10000, 900 + static_cast<std::uint64_t>(rep));
    tv.push_back(e.tvd.value);
    js.push_back(e.js_distance.value);
  }
  const double r = pearson(tv, js);
  Outcome o;
  o.pass = r >= 0.99;
  o.detail = fmt("120 pairs, TVD range %.3f-%.3f, Pearson(TVD, JS distance) = %.5f", *std::min_element(tv.begin(), tv.end()),
                 *std::max_element(tv.begin(), tv.end()), r);
  return o;
}

// 7. Baselines against independent oracles; offsets move only the Bayes metrics.
Outcome baseline_correctness() {
  std::mt19937_64 rng(71);
  double cka_err = 0.0, rsa_err = 0.0, offset_err = 0.0;
  bool shape_exact = true;
  double weakest_bayes = INFINITY;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 25;
    const Matrix x = gaussian_matrix(n, 4 + rep % 5, rng);
    const Matrix y = gaussian_matrix(n, 6, rng) + x.leftCols(1) * gaussian_matrix(1, 6, rng);
    const Matrix kx = kernel_of(x).values;
    const Matrix ky = kernel_of(y).values;

    Matrix xc = x, yc = y;
    xc.rowwise() -= xc.colwise().mean();
    yc.rowwise() -= yc.colwise().mean();
    const double cka_feat =
        (yc.transpose() * xc).squaredNorm() / ((xc.transpose() * xc).norm() * (yc.transpose() * yc).norm());
    cka_err = std::max(cka_err, std::abs(cka(kx, ky) - cka_feat));
    shape_exact = shape_exact && shape_metric(kx, ky).value == std::acos(cka(kx, ky));

    for (bool squared : {true, false}) {
      std::vector<double> dx, dy;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
          const double a = (x.row(i) - x.row(j)).squaredNorm();
          const double b = (y.row(i) - y.row(j)).squaredNorm();
          dx.push_back(squared ? a : std::sqrt(a));
          dy.push_back(squared ? b : std::sqrt(b));
        }
      const double corr = pearson(dx, dy);
      double dot = 0, nx = 0, ny = 0;
      for (std::size_t i = 0; i < dx.size(); ++i) dot += dx[i] * dy[i], nx += dx[i] * dx[i], ny += dy[i] * dy[i];
      rsa_err = std::max(rsa_err, std::abs(rsa_one_minus_corr(kx, ky, squared).value - (1.0 - corr)));
      rsa_err = std::max(rsa_err, std::abs(rsa_arccos(kx, ky, squared).value - std::acos(dot / std::sqrt(nx * ny))));
    }

    Matrix shifted = x;
    shifted.rowwise() += gaussian_matrix(1, x.cols(), rng, 3.0).row(0);
    const Matrix ks = kernel_of(shifted).values;
    offset_err = std::max({offset_err, std::abs(cka_distance(ks, ky).value - cka_distance(kx, ky).value),
                           std::abs(rsa_one_minus_corr(ks, ky).value - rsa_one_minus_corr(kx, ky).value),
                           std::abs(rsa_arccos(ks, ky).value - rsa_arccos(kx, ky).value), cka_distance(kx, ks).value,
                           rsa_one_minus_corr(kx, ks).value});
    const double a = heuristic_a(n, kDefaultB);
    const auto e = estimate_pair(layer_model(x, a), layer_model(shifted, a), 10000, 300 + static_cast<std::uint64_t>(rep));
    weakest_bayes = std::min({weakest_bayes, e.tvd.value / e.tvd.std_error, e.jsd.value / e.jsd.std_error});
  }
  Outcome o;
  o.pass = cka_err <= 1e-8 && shape_exact && rsa_err <= 1e-12 && offset_err <= 1e-8 && weakest_bayes > 10.0;
  o.detail = fmt("CKA err %.1e, shape exact %s, RSA err %.1e, baseline offset change %.1e, Bayes offset >= %.1f SE",
                 cka_err, shape_exact ? "yes" : "no", rsa_err, offset_err, weakest_bayes);
  return o;
}

// 9. Spread over random stimulus subsets shrinks at least like 1/sqrt(n).
// Few factors per layer keeps n = 25 in the 1/sqrt(n) regime. Monte-Carlo
// noise is flat in n, and a ratio of SDs from R repeats is only good to about
// 1/sqrt(R).
Outcome stability_scaling() {
  const auto pools = testing_support::named_kernels(testing_support::sliding_factor_layers(4, 1000, 4, 2, 40, 5));
  auto ratios = [&](const std::vector<Metric>& metrics, std::size_t repeats, std::size_t samples) {
    StabilityOptions opts;
    opts.n_repeats = repeats;
    opts.metrics = metrics;
    opts.n_samples = samples;
    opts.seed = 3;
    opts.n_images = 25;
    const auto small = stability_study(pools, opts);
    opts.n_images = 100;
    const auto large = stability_study(pools, opts);
    std::vector<double> out;
    for (std::size_t k = 0; k < metrics.size(); ++k) out.push_back(small.metrics[k].median_sd / large.metrics[k].median_sd);
    return out;
  };
  const std::vector<Metric> bayes{Metric::tvd, Metric::jsd, Metric::js_distance};
  const std::vector<Metric> baselines{Metric::cka_distance, Metric::shape_metric, Metric::rsa_one_minus_corr,
                                      Metric::rsa_arccos};
  auto r = ratios(bayes, 60, kDefaultSamples);
  const auto rb = ratios(baselines, 2000, 2);
  r.insert(r.end(), rb.begin(), rb.end());
  std::vector<Metric> all = bayes;
  all.insert(all.end(), baselines.begin(), baselines.end());

  std::string detail;
  for (std::size_t k = 0; k < all.size(); ++k)
    detail += fmt("%s%s %.2f", detail.empty() ? "" : ", ", std::string(metric_name(all[k])).c_str(), r[k]);
  Outcome o;
  o.pass = *std::min_element(r.begin(), r.end()) >= 1.8;
  o.detail = "median SD ratio n=25 / n=100: " + detail;
  return o;
}

// 10. Metric MDS.
Outcome mds_checks() {
  Matrix tri = Matrix::Ones(3, 3);
  tri.diagonal().setZero();
  const auto e3 = mds_embed(tri);

  std::mt19937_64 rng(101);
  const Matrix pts = gaussian_matrix(10, 2, rng);
  Matrix d(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  const auto e10 = mds_embed(d, {.seed = 1});
  double rel = 0.0;
  for (int i = 0; i < 10; ++i)
    for (int j = i + 1; j < 10; ++j) rel = std::max(rel, std::abs((e10.coords.row(i) - e10.coords.row(j)).norm() - d(i, j)) / d(i, j));

  bool monotone = true;
  std::uniform_real_distribution<double> jitter(0.7, 1.3);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index m = 6 + rep;
    const Matrix p = gaussian_matrix(m, 4, rng);
    Matrix dm = Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j) dm(i, j) = dm(j, i) = (p.row(i) - p.row(j)).norm() * jitter(rng);
    const auto run = smacof(dm, gaussian_matrix(m, 2, rng), 1000, 0.0);
    for (std::size_t i = 1; i < run.stress_history.size(); ++i)
      monotone = monotone && run.stress_history[i] <= run.stress_history[i - 1] * (1.0 + 1e-12);
  }
  Outcome o;
  o.pass = e3.stress < 1e-6 && rel < 1e-3 && monotone;
  o.detail = fmt("triangle stress %.1e, planar max relative error %.1e, stress non-increasing: %s", e3.stress, rel,
                 monotone ? "yes" : "no");
  return o;
}

// 11. Byte-identical reruns, independent of thread count.
Outcome determinism() {
  const auto dir = fs::temp_directory_path() / ("repmetric_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const auto fam = testing_support::latent_layer_family(4, 40, 4, 12, 0.3, 111);
  std::string entries;
  for (std::size_t l = 0; l < fam.layers.size(); ++l) {
    const auto file = "l" + std::to_string(l) + ".rmx";
    write_matrix({fam.layers[l], {}, MatrixKind::representation}, dir / file);
    entries += std::string(l ? "," : "") + R"({"name": "l)" + std::to_string(l) + R"(", "path": ")" + file +
               R"(", "kind": "representation"})";
  }
  write_file(dir / "manifest.json", R"({"entries": [)" + entries + R"(], "seed": 2024, "n_samples": 4000})");
  std::ostringstream sink;
  auto run = [&](const std::string& out, const std::string& threads) {
    return cli::run({"--threads", threads, "compare", "--manifest", (dir / "manifest.json").string(), "--metrics",
                     "tvd,jsd,js_distance,cka,shape,rsa_corr,rsa_arccos", "--out", (dir / out).string()},
                    sink, sink);
  };
  const bool ran = run("a", "1") == 0 && run("b", "1") == 0 && run("c", "4") == 0;
  std::size_t files = 0, same = 0;
  if (ran) {
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
      const auto name = entry.path().filename();
      ++files;
      const auto bytes = read_file(entry.path());
      if (bytes == read_file(dir / "b" / name) && bytes == read_file(dir / "c" / name)) ++same;
    }
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = ran && files > 0 && same == files;
  o.detail = fmt("%zu/%zu output files byte-identical across two 1-thread runs and one 4-thread run", same, files);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 oracle equivalence (1-D/2-D)", oracle_equivalence},
      {"2 estimator precision", estimator_precision},
      {"3 equivalence classes", equivalence_classes},
      {"4 gradient checks", gradient_checks},
      {"5 heuristic constants", heuristic_constants},
      {"6 noise sweep shape", sweep_shape},
      {"7 baseline correctness", baseline_correctness},
      {"8 TVD / JS distance agreement", agreement},
      {"9 stability scaling", stability_scaling},
      {"10 MDS", mds_checks},
      {"11 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
