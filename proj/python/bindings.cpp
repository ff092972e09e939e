#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <limits>

#include "repmetric/baseline_metrics.hpp"
#include "repmetric/bayes_metrics.hpp"
#include "repmetric/errors.hpp"
#include "repmetric/harness.hpp"
#include "repmetric/kernel.hpp"
#include "repmetric/matrix_io.hpp"
#include "repmetric/mds.hpp"
#include "repmetric/mvn.hpp"

namespace py = pybind11;
using namespace repmetric;

namespace {

using release = py::call_guard<py::gil_scoped_release>;

GaussianModel model_for(const Matrix& kernel, double a) {
  return GaussianModel(predictive_covariance(KernelMatrix{kernel, {}}, a));
}

py::dict estimate_dict(const DistanceEstimate& e) {
  py::dict d;
  d["metric"] = std::string(to_string(e.metric));
  d["value"] = e.value;
  d["raw_value"] = e.raw_value;
  d["std_error"] = e.std_error;
  d["n_samples"] = e.n_samples;
  d["seed"] = e.seed;
  d["se_degenerate"] = e.se_degenerate;
  return d;
}

std::vector<NamedKernel> named(const std::vector<std::pair<std::string, Matrix>>& layers) {
  std::vector<NamedKernel> out;
  out.reserve(layers.size());
  for (const auto& [name, k] : layers) out.push_back({name, KernelMatrix{k, {}}});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  m.attr("DEFAULT_B") = kDefaultB;
  m.attr("DEFAULT_SAMPLES") = kDefaultSamples;

  m.def(
      "gram", [](const Matrix& x) { return gram(RepresentationMatrix{x, {}}).values; }, py::arg("x"), release());
  m.def(
      "predictive_covariance",
      [](const Matrix& k, double a) { return predictive_covariance(KernelMatrix{k, {}}, a).covariance; },
      py::arg("kernel"), py::arg("a"), release());
  m.def("heuristic_a", &heuristic_a, py::arg("n"), py::arg("b") = kDefaultB);
  m.def("noise_variance_to_a", &noise_variance_to_a, py::arg("variance"));

  m.def(
      "estimate_pair",
      [](const Matrix& k1, const Matrix& k2, double a, std::size_t n_samples, std::uint64_t seed) {
        PairEstimates e;
        {
          py::gil_scoped_release unlocked;
          e = estimate_pair(model_for(k1, a), model_for(k2, a), n_samples, seed);
        }
        py::dict d;
        d["tvd"] = estimate_dict(e.tvd);
        d["jsd"] = estimate_dict(e.jsd);
        d["js_distance"] = estimate_dict(e.js_distance);
        return d;
      },
      py::arg("k1"), py::arg("k2"), py::arg("a") = 0.5, py::arg("n_samples") = kDefaultSamples,
      py::arg("seed") = 0);

  m.def(
      "gradient",
      [](const std::string& metric, const Matrix& c1, const Matrix& c2, std::size_t n_samples, std::uint64_t seed) {
        DistanceGradient g;
        {
          py::gil_scoped_release unlocked;
          if (metric == "tvd") {
            g = tvd_gradient(c1, c2, n_samples, seed);
          } else if (metric == "jsd") {
            g = jsd_gradient(c1, c2, n_samples, seed);
          } else {
            throw UsageError("gradient metric must be tvd or jsd, got '" + metric + "'");
          }
        }
        return py::make_tuple(g.d_cov1, g.d_cov2);
      },
      py::arg("metric"), py::arg("cov1"), py::arg("cov2"), py::arg("n_samples") = kDefaultSamples,
      py::arg("seed") = 0);

  m.def(
      "baseline",
      [](const std::string& metric, const Matrix& k1, const Matrix& k2, bool squared) {
        const Metric which = parse_metric(metric);
        py::gil_scoped_release unlocked;
        switch (which) {
          case Metric::cka_distance: return cka_distance(k1, k2).value;
          case Metric::shape_metric: return shape_metric(k1, k2).value;
          case Metric::rsa_one_minus_corr: return rsa_one_minus_corr(k1, k2, squared).value;
          case Metric::rsa_arccos: return rsa_arccos(k1, k2, squared).value;
          default: throw UsageError("'" + metric + "' is not a baseline metric");
        }
      },
      py::arg("metric"), py::arg("k1"), py::arg("k2"), py::arg("squared") = true);

  m.def(
      "pairwise",
      [](const std::vector<std::pair<std::string, Matrix>>& layers, const std::vector<std::string>& metrics,
         double a, std::size_t n_samples, std::uint64_t seed, std::size_t threads, bool skip) {
        PairwiseOptions o;
        o.metrics.clear();
        for (const auto& name : metrics) o.metrics.push_back(parse_metric(name));
        o.a = a;
        o.n_samples = n_samples;
        o.seed = seed;
        o.threads = threads;
        o.on_error = skip ? FailurePolicy::skip : FailurePolicy::abort;
        const auto kernels = named(layers);
        std::map<Metric, DistanceMatrix> result;
        {
          py::gil_scoped_release unlocked;
          result = pairwise_matrix(kernels, o);
        }
        py::dict out;
        for (const auto& [metric, dm] : result) {
          py::dict d;
          d["labels"] = dm.labels;
          d["values"] = dm.values;
          d["std_errors"] = dm.std_errors;
          out[py::str(std::string(metric_name(metric)))] = d;
        }
        return out;
      },
      py::arg("layers"), py::arg("metrics") = std::vector<std::string>{"tvd", "jsd"}, py::arg("a") = 0.5,
      py::arg("n_samples") = kDefaultSamples, py::arg("seed") = 0, py::arg("threads") = 1,
      py::arg("skip_failures") = false);

  m.def(
      "mds_embed",
      [](const Matrix& distances, std::size_t dims, std::uint64_t seed, std::size_t restarts, std::size_t max_iter,
         double tol) {
        MdsOptions o{dims, seed, restarts, max_iter, tol, 1};
        Embedding e;
        {
          py::gil_scoped_release unlocked;
          e = mds_embed(distances, o);
        }
        py::dict d;
        d["coords"] = e.coords;
        d["stress"] = e.stress;
        d["n_iterations"] = e.n_iterations;
        d["restart"] = e.restart;
        return d;
      },
      py::arg("distances"), py::arg("dims") = 2, py::arg("seed") = 0, py::arg("restarts") = 8,
      py::arg("max_iter") = 500, py::arg("tol") = 1e-9);

  m.def(
      "read_matrix",
      [](const std::filesystem::path& path, const std::string& kind) {
        auto lm = read_matrix(path, parse_matrix_kind(kind));
        return py::make_tuple(lm.values, lm.labels);
      },
      py::arg("path"), py::arg("kind"));
  m.def(
      "write_matrix",
      [](const std::filesystem::path& path, const Matrix& values, const std::string& kind, const Labels& labels) {
        write_matrix(LabeledMatrix{values, labels, parse_matrix_kind(kind)}, path);
      },
      py::arg("path"), py::arg("values"), py::arg("kind"), py::arg("labels") = Labels{});
}
