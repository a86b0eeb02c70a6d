#include "amsreg/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "amsreg/attacks.hpp"
#include "amsreg/checkpoint.hpp"
#include "amsreg/datasource.hpp"
#include "amsreg/errors.hpp"
#include "amsreg/fileio.hpp"
#include "amsreg/flatness.hpp"
#include "amsreg/manifest.hpp"
#include "amsreg/ops.hpp"
#include "amsreg/schema.hpp"
#include "amsreg/verification.hpp"

namespace amsreg::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  const Bytes raw = read_bytes(path);
  try {
    return nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

nlohmann::json grid_json(const GridSpec& g) { return {{"eps_max", g.eps_max}, {"resolution", g.resolution}}; }

fs::path out_dir_or_default(const std::string& out, const std::string& command) {
  return out.empty() ? default_out_dir(command) : fs::path(out);
}

Dataset load_data_arg(const std::string& arg, nlohmann::json& spec_out) {
  spec_out = resolve_data_spec(parse_data_argument(arg));
  return load_dataset(spec_out);
}

void check_compatible(const AnyModel& model, const Dataset& data) {
  const Shape& in = std::visit([](const auto& m) -> const Shape& { return m.input_shape(); }, model);
  if (in != data.sample_shape) {
    throw InputError("dataset sample shape " + shape_str(data.sample_shape) + " does not match model input " +
                     shape_str(in));
  }
}

std::string precision_tag(const AnyModel& m) {
  return std::holds_alternative<Model<float>>(m) ? "standard" : "high";
}

// ---- train ---------------------------------------------------------------

template <typename T>
int train_with(const TrainJob& job, const Dataset& data, const fs::path& out_dir, std::ostream& out) {
  const Model<T> initial = Model<T>::build(job.architecture, job.seed);
  std::optional<FlatnessProbe> probe;
  if (job.probe_samples) {
    const std::size_t n = std::min(*job.probe_samples, data.size());
    probe = FlatnessProbe{subset(data, n, job.probe_seed), job.probe_planes, job.probe_grid, job.probe_seed};
  }
  std::string metrics;
  auto result = train(initial, data, job.train, job.defense, probe, [&](const EpochMetrics& m) {
    metrics += epoch_to_json(m).dump() + "\n";
    out << "epoch " << m.epoch << " loss " << m.loss << " clean_acc " << m.clean_acc;
    if (m.phi) out << " phi " << *m.phi;
    out << "\n";
  });
  ArtifactWriter writer(out_dir);
  writer.write("model.ckpt", encode_checkpoint(result.model));
  writer.write("metrics.jsonl", metrics);
  RunManifest manifest;
  manifest.command = "train";
  manifest.config = job.resolved();
  manifest.seed = job.seed;
  manifest.model_checksum = result.model.checksum();
  writer.finish(manifest);
  out << "wrote " << (out_dir / "model.ckpt").string() << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& out, std::ostream& os) {
  const nlohmann::json config = read_json_file(config_path);
  if (!config.is_object() || !config.contains("data")) throw ConfigError("train config needs a 'data' section");
  const Dataset data = load_dataset(config.at("data"));
  const TrainJob job = parse_train_job(config, data);
  const fs::path dir = out_dir_or_default(out, "train");
  return job.precision == Precision::high ? train_with<double>(job, data, dir, os)
                                          : train_with<float>(job, data, dir, os);
}

// ---- eval ----------------------------------------------------------------

struct EvalOptions {
  std::string ckpt, data, attack, out;
  std::optional<double> eps, step_size;
  std::optional<std::size_t> steps;
  bool random_start = false;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalOptions& o, std::ostream& os) {
  const AnyModel model = load_checkpoint(o.ckpt);
  nlohmann::json data_spec;
  const Dataset data = load_data_arg(o.data, data_spec);
  check_compatible(model, data);
  nlohmann::json report;
  std::optional<AttackConfig> attack;
  if (!o.attack.empty()) {
    AttackConfig c;
    if (o.attack == "custom") {
      if (o.eps) c.eps = *o.eps;
    } else {
      c = attack_preset(o.attack, o.eps);
    }
    if (o.step_size) c.step_size = *o.step_size;
    if (o.steps) c.iters = *o.steps;
    c.random_start = o.random_start;
    c.seed = o.seed;
    c.validate();
    attack = c;
  }
  std::visit(
      [&](const auto& m) {
        if (attack) {
          report = robustness_to_json(evaluate_robustness(m, data, *attack));
        } else {
          report = {{"schema_version", kSchemaVersion},
                    {"clean_acc", clean_accuracy(m, data)},
                    {"n_samples", data.size()}};
        }
      },
      model);
  const fs::path dir = out_dir_or_default(o.out, "eval");
  ArtifactWriter writer(dir);
  writer.write("eval.json", report.dump(2) + "\n");
  RunManifest manifest;
  manifest.command = "eval";
  manifest.config = {{"ckpt", o.ckpt}, {"data", data_spec}, {"precision", precision_tag(model)}};
  if (attack) manifest.config["attack"] = attack_to_json(*attack);
  manifest.seed = o.seed;
  manifest.model_checksum = model_checksum(model);
  writer.finish(manifest);
  os << report.dump(2) << "\n";
  return kOk;
}

// ---- landscape -----------------------------------------------------------

struct LandscapeOptions {
  std::string ckpt, data, kind = "random", out;
  std::size_t index = 0;
  GridSpec grid;
  std::uint64_t seed = 0;
  std::size_t cell = 8;
};

int cmd_landscape(const LandscapeOptions& o, std::ostream& os, std::ostream& es) {
  if (o.kind != "random" && o.kind != "fgsm") throw ConfigError("--kind must be random or fgsm");
  o.grid.validate();
  if (o.cell < 1) throw ConfigError("--cell must be >= 1");
  const AnyModel model = load_checkpoint(o.ckpt);
  nlohmann::json data_spec;
  const Dataset data = load_data_arg(o.data, data_spec);
  check_compatible(model, data);
  if (o.index >= data.size()) {
    throw InputError("sample index " + std::to_string(o.index) + " out of range (dataset has " +
                     std::to_string(data.size()) + ")");
  }
  const std::size_t label = data.labels[o.index];
  LandscapeSurface s = std::visit(
      [&](const auto& m) {
        using T = typename std::decay_t<decltype(m)>::value_type;
        const Tensor<T> x = reshape(data.sample<T>(o.index), m.input_shape());
        const LandscapePlane plane =
            o.kind == "fgsm" ? fgsm_plane(m, x, label, o.grid, o.seed)
                             : neighborhood(x, sample_direction_pair(m.input_dim(), std::nullopt, o.seed), o.grid);
        return surface(m, plane);
      },
      model);
  if (s.values[o.grid.center_index()] != 0.0) {
    es << "error: surface centre is " << s.values[o.grid.center_index()] << ", expected exactly 0\n";
    return kVerifyFailed;
  }
  const fs::path dir = out_dir_or_default(o.out, "landscape");
  ArtifactWriter writer(dir);
  writer.write("surface.csv", surface_csv(s));
  writer.write("surface.ppm", surface_ppm(s, o.cell));
  RunManifest manifest;
  manifest.command = "landscape";
  manifest.config = {{"ckpt", o.ckpt},
                     {"data", data_spec},
                     {"index", o.index},
                     {"label", label},
                     {"direction_kind", o.kind},
                     {"zero_direction", s.plane.zero_direction},
                     {"grid", grid_json(o.grid)},
                     {"variance", surface_variance(s)},
                     {"min", s.min},
                     {"max", s.max}};
  manifest.seed = o.seed;
  manifest.model_checksum = model_checksum(model);
  writer.finish(manifest);
  os << "surface " << s.side() << "x" << s.side() << " min " << s.min << " max " << s.max << " -> "
     << dir.string() << "\n";
  return kOk;
}

// ---- flatness ------------------------------------------------------------

struct FlatnessOptions {
  std::string ckpt, data, out;
  std::size_t planes = 1;
  GridSpec grid{0.1, 2};
  std::uint64_t seed = 0;
  std::optional<std::size_t> samples;
};

int cmd_flatness(const FlatnessOptions& o, std::ostream& os) {
  if (o.planes < 1) throw ConfigError("--planes must be >= 1");
  o.grid.validate();
  const AnyModel model = load_checkpoint(o.ckpt);
  nlohmann::json data_spec;
  Dataset data = load_data_arg(o.data, data_spec);
  check_compatible(model, data);
  if (o.samples && *o.samples < data.size()) data = subset(data, *o.samples, o.seed);
  const FlatnessReport report =
      std::visit([&](const auto& m) { return dataset_flatness(m, data, o.planes, o.grid, o.seed); }, model);
  const nlohmann::json j = flatness_to_json(report);
  const fs::path dir = out_dir_or_default(o.out, "flatness");
  ArtifactWriter writer(dir);
  writer.write("flatness.json", j.dump(2) + "\n");
  RunManifest manifest;
  manifest.command = "flatness";
  manifest.config = {{"ckpt", o.ckpt}, {"data", data_spec}, {"planes", o.planes}, {"grid", grid_json(o.grid)}};
  if (o.samples) manifest.config["samples"] = *o.samples;
  manifest.seed = o.seed;
  manifest.model_checksum = model_checksum(model);
  writer.finish(manifest);
  os << "Phi " << std::setprecision(10) << report.Phi << " over " << report.sample_count << " samples\n";
  return kOk;
}

// ---- histogram -----------------------------------------------------------

struct HistogramOptions {
  std::string ckpt, data, out;
  double eps = 8.0 / 255.0;
  std::size_t bins = 30;
  std::uint64_t seed = 0;
};

int cmd_histogram(const HistogramOptions& o, std::ostream& os) {
  if (o.bins < 1) throw ConfigError("--bins must be >= 1");
  if (!(o.eps >= 0.0)) throw ConfigError("--eps must be >= 0");
  const AnyModel model = load_checkpoint(o.ckpt);
  nlohmann::json data_spec;
  const Dataset data = load_data_arg(o.data, data_spec);
  check_compatible(model, data);
  const LikelihoodHistogram h =
      std::visit([&](const auto& m) { return likelihood_histogram(m, data, o.eps, o.bins, o.seed); }, model);
  const double w1 = wasserstein1(h.clean_values, h.perturbed_values);
  const nlohmann::json summary{{"schema_version", kSchemaVersion}, {"eps", o.eps},
                               {"bins", o.bins},                   {"n_samples", data.size()},
                               {"wasserstein1", w1},               {"seed", o.seed}};
  const fs::path dir = out_dir_or_default(o.out, "histogram");
  ArtifactWriter writer(dir);
  writer.write("histogram.csv", histogram_csv(h));
  writer.write("histogram.json", summary.dump(2) + "\n");
  RunManifest manifest;
  manifest.command = "histogram";
  manifest.config = {{"ckpt", o.ckpt}, {"data", data_spec}, {"eps", o.eps}, {"bins", o.bins}};
  manifest.seed = o.seed;
  manifest.model_checksum = model_checksum(model);
  writer.finish(manifest);
  os << "wasserstein1 " << w1 << " -> " << dir.string() << "\n";
  return kOk;
}

// ---- verify --------------------------------------------------------------

int cmd_verify(const VerifyOptions& options, std::ostream& os) {
  const auto results = run_verification(options);
  bool all = true;
  os << std::left << std::setw(48) << "check" << std::setw(6) << "ok" << std::setw(8) << "cases"
     << std::setw(9) << "seconds" << "detail\n";
  for (const auto& r : results) {
    all = all && r.passed;
    std::ostringstream secs;
    secs << std::fixed << std::setprecision(2) << r.seconds;
    os << std::left << std::setw(48) << r.name << std::setw(6) << (r.passed ? "PASS" : "FAIL") << std::setw(8)
       << r.cases << std::setw(9) << secs.str() << r.detail << "\n";
  }
  if (!all) {
    os << "failed:";
    for (const auto& r : results) {
      if (!r.passed) os << " [" << r.name << "]";
    }
    os << "\n";
  }
  return all ? kOk : kVerifyFailed;
}

int cmd_check_manifest(const std::string& path, std::ostream& os) {
  const auto problems = verify_manifest(path);
  for (const auto& p : problems) os << p << "\n";
  if (!problems.empty()) return kCorrupted;
  os << "manifest intact\n";
  return kOk;
}

}  // namespace

fs::path default_out_dir(const std::string& command) {
  if (const char* env = std::getenv("AMSREG_OUT_DIR"); env != nullptr && *env != '\0') {
    return fs::path(env) / command;
  }
  return fs::path("amsreg-out") / command;
}

nlohmann::json TrainJob::resolved() const {
  nlohmann::json j{{"seed", seed},
                   {"precision", precision_name(precision)},
                   {"data", data},
                   {"model", architecture_to_json(architecture)},
                   {"train", train_config_to_json(train)},
                   {"defense", defense_to_json(defense)}};
  if (probe_samples) {
    j["probe"] = {{"samples", *probe_samples},
                  {"planes", probe_planes},
                  {"eps_max", probe_grid.eps_max},
                  {"resolution", probe_grid.resolution},
                  {"seed", probe_seed}};
  }
  return j;
}

TrainJob parse_train_job(const nlohmann::json& config) {
  if (!config.is_object() || !config.contains("data")) throw ConfigError("train config needs a 'data' section");
  return parse_train_job(config, load_dataset(config.at("data")));
}

TrainJob parse_train_job(const nlohmann::json& config, const Dataset& data) {
  reject_unknown(config, {"seed", "precision", "data", "model", "train", "defense", "probe"}, "train config");
  TrainJob job;
  try {
    job.seed = config.value("seed", std::uint64_t{0});
    job.precision = parse_precision(config.value("precision", std::string("standard")));
    job.data = resolve_data_spec(config.at("data"));
    const nlohmann::json model = config.value("model", nlohmann::json::object());
    reject_unknown(model, {"preset", "hidden", "kernel"}, "model");
    job.architecture.preset = model.value("preset", std::string("mlp"));
    job.architecture.hidden = model.value("hidden", std::vector<std::size_t>{});
    job.architecture.kernel = model.value("kernel", job.architecture.kernel);
    job.architecture.input_shape = data.sample_shape;
    job.architecture.num_classes = data.num_classes;
    resolve_layers(job.architecture);
    nlohmann::json train = config.value("train", nlohmann::json::object());
    if (train.is_object() && !train.contains("seed")) train["seed"] = job.seed;
    job.train = train_config_from_json(train);
    job.defense = defense_from_json(config.value("defense", nlohmann::json::object()));
    if (config.contains("probe")) {
      const nlohmann::json& p = config.at("probe");
      reject_unknown(p, {"samples", "planes", "eps_max", "resolution", "seed"}, "probe");
      job.probe_samples = p.value("samples", std::size_t{100});
      job.probe_planes = p.value("planes", job.probe_planes);
      job.probe_grid.eps_max = p.value("eps_max", job.probe_grid.eps_max);
      job.probe_grid.resolution = p.value("resolution", job.probe_grid.resolution);
      job.probe_seed = p.value("seed", job.seed);
      if (*job.probe_samples < 1 || job.probe_planes < 1) throw ConfigError("probe needs samples and planes >= 1");
      job.probe_grid.validate();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  return job;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"amsreg: likelihood landscapes, flatness and defenses for small classifiers"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");
  train_cmd->add_option("--config", config_path, "Config file")->required();
  train_cmd->add_option("--out", out_dir, "Output directory");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Clean and adversarial accuracy of a checkpoint");
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset directory, JSON spec or blobs:...")->required();
  eval_cmd->add_option("--attack", eval.attack, "pgd-cifar, pgd-fmnist, fgsm or custom");
  eval_cmd->add_option("--eps", eval.eps, "Attack radius (l-inf, [0,1] units)");
  eval_cmd->add_option("--steps", eval.steps, "PGD iterations");
  eval_cmd->add_option("--step-size", eval.step_size, "PGD step size");
  eval_cmd->add_flag("--random-start", eval.random_start, "Start PGD inside the ball");
  eval_cmd->add_option("--seed", eval.seed, "Seed for the random start");
  eval_cmd->add_option("--out", eval.out, "Output directory");

  LandscapeOptions land;
  auto* land_cmd = app.add_subcommand("landscape", "Relative log-likelihood surface around one sample");
  land_cmd->add_option("--ckpt", land.ckpt, "Checkpoint")->required();
  land_cmd->add_option("--data", land.data, "Dataset directory, JSON spec or blobs:...")->required();
  land_cmd->add_option("--index", land.index, "Sample index");
  land_cmd->add_option("--kind", land.kind, "random or fgsm");
  land_cmd->add_option("--eps-max", land.grid.eps_max, "Half-width of the grid");
  land_cmd->add_option("--resolution", land.grid.resolution, "Points per half-axis");
  land_cmd->add_option("--seed", land.seed, "Direction seed");
  land_cmd->add_option("--cell", land.cell, "Heatmap pixels per grid point");
  land_cmd->add_option("--out", land.out, "Output directory");

  FlatnessOptions flat;
  auto* flat_cmd = app.add_subcommand("flatness", "Phi flatness of a checkpoint over a dataset");
  flat_cmd->add_option("--ckpt", flat.ckpt, "Checkpoint")->required();
  flat_cmd->add_option("--data", flat.data, "Dataset directory, JSON spec or blobs:...")->required();
  flat_cmd->add_option("--planes", flat.planes, "Random planes per sample");
  flat_cmd->add_option("--eps-max", flat.grid.eps_max, "Half-width of the grid");
  flat_cmd->add_option("--resolution", flat.grid.resolution, "Points per half-axis");
  flat_cmd->add_option("--seed", flat.seed, "Plane seed");
  flat_cmd->add_option("--samples", flat.samples, "Evaluate on a stratified subset of this size");
  flat_cmd->add_option("--out", flat.out, "Output directory");

  HistogramOptions hist;
  auto* hist_cmd = app.add_subcommand("histogram", "Log-likelihood histogram of clean vs noisy inputs");
  hist_cmd->add_option("--ckpt", hist.ckpt, "Checkpoint")->required();
  hist_cmd->add_option("--data", hist.data, "Dataset directory, JSON spec or blobs:...")->required();
  hist_cmd->add_option("--eps", hist.eps, "Uniform noise radius");
  hist_cmd->add_option("--bins", hist.bins, "Number of bins");
  hist_cmd->add_option("--seed", hist.seed, "Noise seed");
  hist_cmd->add_option("--out", hist.out, "Output directory");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run the built-in verification battery");
  verify_cmd->add_option("--seed", verify.seed, "Battery seed");
  verify_cmd->add_flag("--inject-fault", verify.inject_fault)->group("");

  auto* manifest_cmd = app.add_subcommand("check-manifest", "Re-check the outputs listed in a manifest");
  manifest_cmd->add_option("manifest", manifest_path, "Path to manifest.json")->required();

  std::vector<const char*> argv{"amsreg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, out_dir, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*land_cmd) return cmd_landscape(land, out, err);
    if (*flat_cmd) return cmd_flatness(flat, out);
    if (*hist_cmd) return cmd_histogram(hist, out);
    if (*verify_cmd) return cmd_verify(verify, out);
    if (*manifest_cmd) return cmd_check_manifest(manifest_path, out);
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << " (epoch " << e.epoch() << ")\n";
    return kDiverged;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const CorruptionError& e) {
    err << "error: " << e.what() << "\n";
    return kCorrupted;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kVerifyFailed;
  }
  return kConfigError;
}

}  // namespace amsreg::cli
