#pragma once
// Resolves dataset descriptions used by configs and the command line.
//
// JSON form:
//   {"kind": "blobs", "n_per_class", "num_classes", "dim", "separation",
//    "noise_std", "seed", "split"}
//   {"kind": "idx", "images": <path>, "labels": <path>}
//   {"kind": "fashion_mnist", "dir": <path>, "split": "train"|"test"}
//   {"kind": "cifar10", "dir": <path>, "split": "train"|"test"}
// Any of them may add "subset": n and "subset_seed".
//
// Command-line form: a directory holding uncompressed Fashion-MNIST or CIFAR-10
// files, a path to a JSON file with the object above, or an inline
// "blobs:key=value,..." string (keys n, k, dim, sep, noise, seed, split).

#include <string>

#include <json.hpp>

#include "amsreg/data.hpp"

namespace amsreg {

// Normalises a --data argument into the JSON form (directory kinds are
// detected from the files present). Throws ConfigError or IoError.
nlohmann::json parse_data_argument(const std::string& arg);

// Fills in every default so the result fully describes the dataset.
nlohmann::json resolve_data_spec(const nlohmann::json& spec);

Dataset load_dataset(const nlohmann::json& spec);

}  // namespace amsreg
