#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "repmetric/errors.hpp"
#include "repmetric/harness.hpp"
#include "repmetric/kernel.hpp"
#include "repmetric/matrix_io.hpp"
#include "repmetric/mds.hpp"

namespace repmetric::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr Eigen::Index kCsvMaxRows = 200;
constexpr const char* kSeedScheme = "pair seed = derive_seed(seed, fnv1a(lo) ^ 0 ^ fnv1a(hi)), labels sorted";

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

FileFormat pick_format(const std::string& flag, Eigen::Index rows) {
  if (flag == "csv") return FileFormat::csv;
  if (flag == "bin") return FileFormat::binary;
  return rows <= kCsvMaxRows ? FileFormat::csv : FileFormat::binary;
}

fs::path matrix_file(const fs::path& dir, const std::string& stem, FileFormat format) {
  return dir / (stem + (format == FileFormat::csv ? ".csv" : ".rmx"));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json manifest_json(const std::string& manifest_path, const LayerManifest& manifest) {
  json layers = json::array();
  for (const auto& e : manifest.entries) {
    layers.push_back({{"name", e.name}, {"path", manifest.resolve(e).string()}, {"kind", to_string(e.kind)}});
  }
  return {{"path", manifest_path}, {"layers", layers}};
}

// Where the noise weight comes from: command line first, then the manifest,
// then the default b.
struct NoiseChoice {
  std::optional<double> a;
  std::optional<double> b;
  double resolve(std::size_t n) const { return a ? *a : heuristic_a(n, *b); }
};

NoiseChoice choose_noise(const CLI::Option* a_opt, double a, const CLI::Option* b_opt, double b,
                         const LayerManifest& manifest) {
  if (a_opt->count() > 0) return {a, std::nullopt};
  if (b_opt->count() > 0) return {std::nullopt, b};
  if (manifest.a && manifest.b) throw UsageError("manifest sets both a and b; give at most one");
  if (manifest.a) return {*manifest.a, std::nullopt};
  return {std::nullopt, manifest.b.value_or(kDefaultB)};
}

// ---------------------------------------------------------------- gram

struct GramArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string format = "auto";
};

std::size_t numerical_rank(const Matrix& k) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(k, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  const double tol = static_cast<double>(k.rows()) * std::numeric_limits<double>::epsilon() * top;
  return static_cast<std::size_t>((ev.array() > tol).count());
}

int cmd_gram(const GramArgs& args, std::ostream& out) {
  for (const auto& input : args.inputs) {
    const fs::path in(input);
    const auto rep = read_matrix(in, MatrixKind::representation);
    KernelMatrix k;
    try {
      k = gram({rep.values, rep.labels});
    } catch (const Error& e) {
      throw ValidationError(in.string() + ": " + e.what());
    }
    const fs::path dir = args.out.empty() ? in.parent_path() : fs::path(args.out);
    if (!dir.empty()) ensure_dir(dir);
    const auto format = pick_format(args.format, k.values.rows());
    const auto path = matrix_file(dir, in.stem().string() + "_kernel", format);
    write_matrix({k.values, k.labels, MatrixKind::kernel}, path, format);
    out << path.string() << ": n=" << k.size() << " trace=" << number(k.values.trace())
        << " rank=" << numerical_rank(k.values) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string manifest;
  std::string metrics = "tvd,jsd";
  double a = 0.5;
  double b = kDefaultB;
  std::size_t samples = kDefaultSamples;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "auto";
  std::string on_error = "abort";
  std::string rsa = "squared";
  CLI::Option* a_opt = nullptr;
  CLI::Option* b_opt = nullptr;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int cmd_compare(const CompareArgs& args, std::size_t threads, std::ostream& out) {
  const auto manifest = read_manifest(args.manifest);
  const auto kernels = load_kernels(manifest);
  if (kernels.empty()) throw ValidationError("manifest lists no layers");
  const auto noise = choose_noise(args.a_opt, args.a, args.b_opt, args.b, manifest);

  PairwiseOptions opts;
  opts.metrics = parse_metric_list(args.metrics);
  opts.a = noise.resolve(static_cast<std::size_t>(kernels.front().kernel.size()));
  opts.n_samples = args.samples_opt->count() > 0 ? args.samples : manifest.n_samples.value_or(kDefaultSamples);
  opts.seed = args.seed_opt->count() > 0 ? args.seed : manifest.seed.value_or(0);
  opts.threads = threads;
  opts.on_error = args.on_error == "skip" ? FailurePolicy::skip : FailurePolicy::abort;
  opts.rsa_squared = args.rsa == "squared";

  const auto results = pairwise_matrix(kernels, opts);

  const fs::path dir(args.out);
  ensure_dir(dir);
  json outputs = json::array();
  json holes = json::array();
  for (const auto metric : opts.metrics) {
    const auto& dm = results.at(metric);
    const auto format = pick_format(args.format, dm.values.rows());
    // Skipped pairs are written as 0 and listed in the run record.
    const Matrix values = dm.values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
    const auto name = std::string(metric_name(metric));
    const auto path = matrix_file(dir, name, format);
    write_matrix({values, dm.labels, MatrixKind::distance}, path, format);
    outputs.push_back(path.filename().string());
    if (is_bayes(metric)) {
      const auto se_path = matrix_file(dir, name + "_se", format);
      write_matrix({dm.std_errors, dm.labels, MatrixKind::distance}, se_path, format);
      outputs.push_back(se_path.filename().string());
    }
    if (holes.empty()) {
      for (const auto& [i, j] : dm.holes) holes.push_back({dm.labels[i], dm.labels[j]});
    }
    out << name << ": " << path.string() << "\n";
  }

  std::vector<std::string> names;
  for (auto m : opts.metrics) names.emplace_back(metric_name(m));
  json record = {{"command", "compare"},
                 {"version", std::string(kVersion)},
                 {"manifest", manifest_json(args.manifest, manifest)},
                 {"metrics", names},
                 {"a", opts.a},
                 {"b", noise.b ? json(*noise.b) : json(nullptr)},
                 {"n_samples", opts.n_samples},
                 {"seed", opts.seed},
                 {"seed_scheme", kSeedScheme},
                 {"on_error", args.on_error},
                 {"rsa_distances", args.rsa},
                 {"format", args.format},
                 {"holes", holes},
                 {"outputs", outputs}};
  write_json(dir / "run.json", record);
  if (!holes.empty()) out << holes.size() << " pair(s) skipped; see run.json\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string manifest;
  std::vector<std::string> layers;
  std::vector<std::size_t> n_values;
  std::vector<double> noise_a{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> noise_var;
  double b = kDefaultB;
  std::size_t samples = kDefaultSamples;
  std::uint64_t seed = 0;
  bool with_tvd = false;
  std::string out;
  CLI::Option* var_opt = nullptr;
  CLI::Option* b_opt = nullptr;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int cmd_sweep(const SweepArgs& args, std::size_t threads, std::ostream& out) {
  const auto manifest = read_manifest(args.manifest);
  const auto kernels = load_kernels(manifest);
  const NamedKernel* pools[2] = {nullptr, nullptr};
  if (args.layers.empty()) {
    if (kernels.size() < 2) throw ValidationError("sweep needs two layers");
    pools[0] = &kernels[0];
    pools[1] = &kernels[1];
  } else {
    if (args.layers.size() != 2) throw UsageError("--layers takes exactly two names");
    for (int i = 0; i < 2; ++i) {
      const auto it = std::find_if(kernels.begin(), kernels.end(),
                                   [&](const NamedKernel& k) { return k.name == args.layers[i]; });
      if (it == kernels.end()) throw ValidationError("no layer named '" + args.layers[i] + "' in the manifest");
      pools[i] = &*it;
    }
  }

  std::vector<double> noise = args.noise_a;
  if (args.var_opt->count() > 0) {
    noise.clear();
    for (double v : args.noise_var) noise.push_back(noise_variance_to_a(v));
  }
  SweepOptions opts;
  opts.n_samples = args.samples_opt->count() > 0 ? args.samples : manifest.n_samples.value_or(kDefaultSamples);
  opts.seed = args.seed_opt->count() > 0 ? args.seed : manifest.seed.value_or(0);
  opts.b = args.b_opt->count() > 0 ? args.b : manifest.b.value_or(kDefaultB);
  opts.with_tvd = args.with_tvd;
  opts.threads = threads;
  const auto grid = snr_sweep(*pools[0], *pools[1], args.n_values, noise, opts);

  std::ostringstream csv;
  csv << "n,a,proportional,jsd,jsd_se";
  if (opts.with_tvd) csv << ",tvd,tvd_se";
  csv << "\n";
  auto row = [&](const SweepCell& c) {
    csv << c.n << "," << number(c.a) << "," << (c.proportional ? 1 : 0) << "," << number(c.jsd.value) << ","
        << number(c.jsd.std_error);
    if (c.tvd) csv << "," << number(c.tvd->value) << "," << number(c.tvd->std_error);
    csv << "\n";
  };
  for (std::size_t i = 0; i < grid.n_values.size(); ++i) {
    for (std::size_t k = 0; k < grid.noise_values.size(); ++k) row(grid.at(i, k));
    row(grid.proportional[i]);
  }

  const fs::path dir(args.out);
  ensure_dir(dir);
  write_file(dir / "sweep.csv", csv.str());
  json record = {{"command", "sweep"},
                 {"version", std::string(kVersion)},
                 {"manifest", manifest_json(args.manifest, manifest)},
                 {"layers", {pools[0]->name, pools[1]->name}},
                 {"n_values", args.n_values},
                 {"noise_a", noise},
                 {"b", opts.b},
                 {"n_samples", opts.n_samples},
                 {"seed", opts.seed},
                 {"seed_scheme", kSeedScheme},
                 {"tvd", opts.with_tvd},
                 {"outputs", {"sweep.csv"}}};
  write_json(dir / "run.json", record);
  out << "sweep: " << (dir / "sweep.csv").string() << " (" << grid.cells.size() + grid.proportional.size()
      << " cells)\n";
  return 0;
}

// ---------------------------------------------------------------- stability

struct StabilityArgs {
  std::string manifest;
  std::vector<std::size_t> n_images;
  std::size_t repeats = 100;
  std::string metrics = "tvd,jsd,js_distance,cka,shape,rsa_corr,rsa_arccos";
  double b = kDefaultB;
  std::size_t samples = kDefaultSamples;
  std::uint64_t seed = 0;
  std::string rsa = "squared";
  std::string out;
  CLI::Option* b_opt = nullptr;
  CLI::Option* samples_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

int cmd_stability(const StabilityArgs& args, std::size_t threads, std::ostream& out) {
  if (args.repeats < 2) throw UsageError("--repeats must be at least 2");
  const auto manifest = read_manifest(args.manifest);
  const auto kernels = load_kernels(manifest);

  StabilityOptions opts;
  opts.n_repeats = args.repeats;
  opts.metrics = parse_metric_list(args.metrics);
  opts.b = args.b_opt->count() > 0 ? args.b : manifest.b.value_or(kDefaultB);
  opts.n_samples = args.samples_opt->count() > 0 ? args.samples : manifest.n_samples.value_or(kDefaultSamples);
  opts.seed = args.seed_opt->count() > 0 ? args.seed : manifest.seed.value_or(0);
  opts.threads = threads;
  opts.rsa_squared = args.rsa == "squared";

  std::ostringstream table;
  std::ostringstream per_pair;
  table << "metric,n_images,median_sd,max_sd\n";
  per_pair << "metric,n_images,layer1,layer2,mean,sd\n";
  json a_values = json::object();
  for (const auto n : args.n_images) {
    opts.n_images = n;
    const auto report = stability_study(kernels, opts);
    a_values[std::to_string(n)] = report.a;
    for (const auto& ms : report.metrics) {
      const auto name = std::string(metric_name(ms.metric));
      table << name << "," << n << "," << number(ms.median_sd) << "," << number(ms.max_sd) << "\n";
      for (std::size_t p = 0; p < ms.pairs.size(); ++p) {
        per_pair << name << "," << n << "," << report.layers[ms.pairs[p].first] << ","
                 << report.layers[ms.pairs[p].second] << "," << number(ms.pair_mean[p]) << ","
                 << number(ms.pair_sd[p]) << "\n";
      }
      out << name << " n=" << n << ": median sd " << number(ms.median_sd) << ", max sd " << number(ms.max_sd)
          << "\n";
    }
  }

  const fs::path dir(args.out);
  ensure_dir(dir);
  write_file(dir / "stability.csv", table.str());
  write_file(dir / "stability_pairs.csv", per_pair.str());
  std::vector<std::string> names;
  for (auto m : opts.metrics) names.emplace_back(metric_name(m));
  json record = {{"command", "stability"},
                 {"version", std::string(kVersion)},
                 {"manifest", manifest_json(args.manifest, manifest)},
                 {"metrics", names},
                 {"n_images", args.n_images},
                 {"repeats", opts.n_repeats},
                 {"b", opts.b},
                 {"a", a_values},
                 {"n_samples", opts.n_samples},
                 {"seed", opts.seed},
                 {"seed_scheme", "repeat r: subset from derive_seed(derive_seed(seed, r), 0), "
                                 "pairs under master derive_seed(derive_seed(seed, r), 1)"},
                 {"rsa_distances", args.rsa},
                 {"outputs", {"stability.csv", "stability_pairs.csv"}}};
  write_json(dir / "run.json", record);
  return 0;
}

// ---------------------------------------------------------------- embed

struct EmbedArgs {
  std::string distances;
  MdsOptions mds;
  std::string out;
};

int cmd_embed(EmbedArgs args, std::size_t threads, std::ostream& out) {
  const auto d = read_matrix(args.distances, MatrixKind::distance);
  args.mds.threads = threads;
  const auto e = mds_embed(d.values, args.mds);

  std::ostringstream csv;
  csv << "label";
  for (Eigen::Index c = 0; c < e.coords.cols(); ++c) csv << ",dim" << c + 1;
  csv << "\n";
  for (Eigen::Index i = 0; i < e.coords.rows(); ++i) {
    csv << (d.labels.empty() ? std::to_string(i) : d.labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index c = 0; c < e.coords.cols(); ++c) csv << "," << number(e.coords(i, c));
    csv << "\n";
  }

  const fs::path dir(args.out);
  ensure_dir(dir);
  write_file(dir / "embedding.csv", csv.str());
  json record = {{"command", "embed"},
                 {"version", std::string(kVersion)},
                 {"distances", args.distances},
                 {"dims", args.mds.dims},
                 {"seed", args.mds.seed},
                 {"restarts", args.mds.restarts},
                 {"max_iter", args.mds.max_iter},
                 {"tol", args.mds.tol},
                 {"stress", e.stress},
                 {"n_iterations", e.n_iterations},
                 {"best_restart", e.restart},
                 {"outputs", {"embedding.csv"}}};
  write_json(dir / "run.json", record);
  out << "stress " << number(e.stress) << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distances between neural network layer representations", "repmetric"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)")->envname("REPMETRIC_THREADS");

  const auto format_check = CLI::IsMember({"auto", "csv", "bin"});

  GramArgs gram_args;
  auto* gram_cmd = app.add_subcommand("gram", "write the kernel X Xᵀ of each representation file");
  gram_cmd->add_option("inputs", gram_args.inputs, "representation files")->required();
  gram_cmd->add_option("--out", gram_args.out, "output directory (default: next to each input)");
  gram_cmd->add_option("--format", gram_args.format)->check(format_check);

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "pairwise distance matrices between layers");
  cmp_cmd->add_option("--manifest", cmp.manifest, "layer manifest (JSON)")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--metrics", cmp.metrics, "comma-separated metric names")->capture_default_str();
  cmp.a_opt = cmp_cmd->add_option("--a", cmp.a, "noise mixture weight in [0, 1]");
  cmp.b_opt = cmp_cmd->add_option("--b", cmp.b, "noise per stimulus; a = bn / (1 + bn)");
  cmp.a_opt->excludes(cmp.b_opt);
  cmp.samples_opt = cmp_cmd->add_option("--samples", cmp.samples, "Monte-Carlo draws per distribution");
  cmp.seed_opt = cmp_cmd->add_option("--seed", cmp.seed, "master seed");
  cmp_cmd->add_option("--out", cmp.out, "output directory")->required();
  cmp_cmd->add_option("--format", cmp.format)->check(format_check);
  cmp_cmd->add_option("--on-error", cmp.on_error)->check(CLI::IsMember({"abort", "skip"}));
  cmp_cmd->add_option("--rsa-distances", cmp.rsa)->check(CLI::IsMember({"squared", "euclidean"}));

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "JSD over stimulus counts and noise levels");
  sw_cmd->add_option("--manifest", sw.manifest)->required()->check(CLI::ExistingFile);
  sw_cmd->add_option("--layers", sw.layers, "two layer names (default: first two entries)")->delimiter(',');
  sw_cmd->add_option("--n-values", sw.n_values, "stimulus counts")->required()->delimiter(',');
  auto* noise_a_opt = sw_cmd->add_option("--noise-a", sw.noise_a, "noise mixture weights")->delimiter(',');
  sw.var_opt = sw_cmd->add_option("--noise-var", sw.noise_var, "noise variances (signal variance 1)")->delimiter(',');
  noise_a_opt->excludes(sw.var_opt);
  sw.b_opt = sw_cmd->add_option("--b", sw.b, "slope of the proportional-noise line");
  sw.samples_opt = sw_cmd->add_option("--samples", sw.samples);
  sw.seed_opt = sw_cmd->add_option("--seed", sw.seed);
  sw_cmd->add_flag("--tvd", sw.with_tvd, "also estimate TVD");
  sw_cmd->add_option("--out", sw.out)->required();

  StabilityArgs st;
  auto* st_cmd = app.add_subcommand("stability", "spread of each metric over random stimulus subsets");
  st_cmd->add_option("--manifest", st.manifest)->required()->check(CLI::ExistingFile);
  st_cmd->add_option("--n-images", st.n_images, "subset sizes")->required()->delimiter(',');
  st_cmd->add_option("--repeats", st.repeats)->capture_default_str();
  st_cmd->add_option("--metrics", st.metrics)->capture_default_str();
  st.b_opt = st_cmd->add_option("--b", st.b);
  st.samples_opt = st_cmd->add_option("--samples", st.samples);
  st.seed_opt = st_cmd->add_option("--seed", st.seed);
  st_cmd->add_option("--rsa-distances", st.rsa)->check(CLI::IsMember({"squared", "euclidean"}));
  st_cmd->add_option("--out", st.out)->required();

  EmbedArgs em;
  auto* em_cmd = app.add_subcommand("embed", "metric MDS of a distance matrix");
  em_cmd->add_option("--distances", em.distances)->required()->check(CLI::ExistingFile);
  em_cmd->add_option("--dims", em.mds.dims)->capture_default_str()->check(CLI::PositiveNumber);
  em_cmd->add_option("--seed", em.mds.seed)->capture_default_str();
  em_cmd->add_option("--restarts", em.mds.restarts)->capture_default_str();
  em_cmd->add_option("--max-iter", em.mds.max_iter)->capture_default_str();
  em_cmd->add_option("--tol", em.mds.tol)->capture_default_str();
  em_cmd->add_option("--out", em.out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (gram_cmd->parsed()) return cmd_gram(gram_args, out);
    if (cmp_cmd->parsed()) return cmd_compare(cmp, threads, out);
    if (sw_cmd->parsed()) return cmd_sweep(sw, threads, out);
    if (st_cmd->parsed()) return cmd_stability(st, threads, out);
    if (em_cmd->parsed()) return cmd_embed(em, threads, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::usage);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::validation);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::validation);
  }
  return static_cast<int>(ErrorKind::usage);
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace repmetric::cli
