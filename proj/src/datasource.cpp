#include "amsreg/datasource.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include "amsreg/errors.hpp"
#include "amsreg/fileio.hpp"

namespace amsreg {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFashionFiles[2][2] = {
    {"train-images-idx3-ubyte", "train-labels-idx1-ubyte"},
    {"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"},
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConfigError("split must be 'train' or 'test', got '" + s + "'");
}

void check_keys(const nlohmann::json& j, std::set<std::string> known) {
  known.insert({"kind", "subset", "subset_seed", "split"});
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("data spec: unknown key '" + key + "'");
  }
}

Dataset concat(std::vector<Dataset> parts) {
  Dataset out = std::move(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].sample_shape != out.sample_shape) throw InputError("CIFAR batches disagree on shape");
    out.inputs.insert(out.inputs.end(), parts[i].inputs.begin(), parts[i].inputs.end());
    out.labels.insert(out.labels.end(), parts[i].labels.begin(), parts[i].labels.end());
    out.num_classes = std::max(out.num_classes, parts[i].num_classes);
  }
  return out;
}

std::vector<fs::path> cifar_files(const fs::path& dir, Split split) {
  if (split == Split::test) return {dir / "test_batch.bin"};
  std::vector<fs::path> files;
  for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  return files;
}

}  // namespace

nlohmann::json parse_data_argument(const std::string& arg) {
  if (arg.rfind("blobs:", 0) == 0 || arg == "blobs") {
    nlohmann::json j{{"kind", "blobs"}};
    std::stringstream ss(arg.size() > 6 ? arg.substr(6) : "");
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("blobs option '" + item + "' needs key=value");
      const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
      try {
        if (key == "n") j["n_per_class"] = std::stoull(value);
        else if (key == "k") j["num_classes"] = std::stoull(value);
        else if (key == "dim") j["dim"] = std::stoull(value);
        else if (key == "sep") j["separation"] = std::stod(value);
        else if (key == "noise") j["noise_std"] = std::stod(value);
        else if (key == "seed") j["seed"] = std::stoull(value);
        else if (key == "split") j["split"] = value;
        else if (key == "subset") j["subset"] = std::stoull(value);
        else throw ConfigError("unknown blobs option '" + key + "'");
      } catch (const std::logic_error&) {
        throw ConfigError("bad value for blobs option '" + key + "'");
      }
    }
    return j;
  }
  const fs::path path(arg);
  if (fs::is_directory(path)) {
    if (fs::exists(path / kFashionFiles[0][0]) || fs::exists(path / kFashionFiles[1][0])) {
      return {{"kind", "fashion_mnist"}, {"dir", arg}, {"split", fs::exists(path / kFashionFiles[1][0]) ? "test" : "train"}};
    }
    if (fs::exists(path / "test_batch.bin") || fs::exists(path / "data_batch_1.bin")) {
      return {{"kind", "cifar10"}, {"dir", arg}, {"split", fs::exists(path / "test_batch.bin") ? "test" : "train"}};
    }
    throw InputError("no Fashion-MNIST or CIFAR-10 files found in " + arg);
  }
  if (!fs::exists(path)) throw IoError("data path does not exist: " + arg);
  const Bytes bytes = read_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("data spec " + arg + " is not valid JSON: " + e.what());
  }
}

nlohmann::json resolve_data_spec(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) throw ConfigError("data spec needs a 'kind'");
  nlohmann::json out = spec;
  try {
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "blobs") {
      check_keys(spec, {"n_per_class", "num_classes", "dim", "separation", "noise_std", "seed"});
      const BlobSpec d;
      out["n_per_class"] = spec.value("n_per_class", d.n_per_class);
      out["num_classes"] = spec.value("num_classes", d.num_classes);
      out["dim"] = spec.value("dim", d.dim);
      out["separation"] = spec.value("separation", d.separation);
      out["noise_std"] = spec.value("noise_std", d.noise_std);
      out["seed"] = spec.value("seed", d.seed);
      out["split"] = spec.value("split", std::string("train"));
    } else if (kind == "idx") {
      check_keys(spec, {"images", "labels"});
      if (!spec.contains("images") || !spec.contains("labels")) throw ConfigError("idx spec needs images and labels");
    } else if (kind == "fashion_mnist" || kind == "cifar10") {
      check_keys(spec, {"dir"});
      if (!spec.contains("dir")) throw ConfigError(kind + " spec needs dir");
      out["split"] = spec.value("split", std::string("train"));
    } else {
      throw ConfigError("unknown data kind '" + kind + "'");
    }
    if (spec.contains("subset")) out["subset_seed"] = spec.value("subset_seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid data spec: ") + e.what());
  }
  return out;
}

Dataset load_dataset(const nlohmann::json& raw) {
  const nlohmann::json spec = resolve_data_spec(raw);
  Dataset data;
  try {
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "blobs") {
      BlobSpec b;
      b.n_per_class = spec.at("n_per_class").get<std::size_t>();
      b.num_classes = spec.at("num_classes").get<std::size_t>();
      b.dim = spec.at("dim").get<std::size_t>();
      b.separation = spec.at("separation").get<double>();
      b.noise_std = spec.at("noise_std").get<double>();
      b.seed = spec.at("seed").get<std::uint64_t>();
      data = synthetic_blobs(b, parse_split(spec.at("split").get<std::string>()));
    } else if (kind == "idx") {
      data = load_idx(spec.at("images").get<std::string>(), spec.at("labels").get<std::string>());
    } else if (kind == "fashion_mnist") {
      const Split split = parse_split(spec.at("split").get<std::string>());
      const fs::path dir = spec.at("dir").get<std::string>();
      const int s = split == Split::train ? 0 : 1;
      data = load_idx(dir / kFashionFiles[s][0], dir / kFashionFiles[s][1]);
      data.name = "fashion_mnist";
      data.split = split;
    } else {
      const Split split = parse_split(spec.at("split").get<std::string>());
      std::vector<Dataset> parts;
      for (const auto& f : cifar_files(spec.at("dir").get<std::string>(), split)) parts.push_back(load_cifar10_bin(f));
      data = concat(std::move(parts));
      data.name = "cifar10";
      data.split = split;
    }
    if (spec.contains("subset")) {
      data = subset(data, spec.at("subset").get<std::size_t>(), spec.at("subset_seed").get<std::uint64_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid data spec: ") + e.what());
  }
  return data;
}

}  // namespace amsreg
