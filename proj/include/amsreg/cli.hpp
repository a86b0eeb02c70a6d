#pragma once
// The `amsreg` command line. Lives in the library so tests can drive it
// in-process.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amsreg/data.hpp"
#include "amsreg/landscape.hpp"
#include "amsreg/model.hpp"
#include "amsreg/training.hpp"

namespace amsreg::cli {

enum ExitCode : int {
  kOk = 0,
  kVerifyFailed = 1,
  kConfigError = 2,
  kDiverged = 3,
  kCorrupted = 4,
};

// Default output directory for `command` when --out is absent:
// $AMSREG_OUT_DIR/<command>, else ./amsreg-out/<command>.
std::filesystem::path default_out_dir(const std::string& command);

// Everything a `train` config file resolves to.
struct TrainJob {
  std::uint64_t seed = 0;
  Precision precision = Precision::standard;
  nlohmann::json data;
  ArchitectureConfig architecture;
  TrainConfig train;
  DefenseConfig defense;
  // Flatness probe: sample count, planes, grid, seed.
  std::optional<std::size_t> probe_samples;
  std::size_t probe_planes = 1;
  GridSpec probe_grid{0.1, 2};
  std::uint64_t probe_seed = 0;

  // Fully expanded config, recorded in the manifest.
  nlohmann::json resolved() const;
};

// Throws ConfigError on unknown keys or invalid values. The model's input
// shape and class count come from `data`.
TrainJob parse_train_job(const nlohmann::json& config, const Dataset& data);
TrainJob parse_train_job(const nlohmann::json& config);

// Runs one command line (args exclude the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace amsreg::cli
