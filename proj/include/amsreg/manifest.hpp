#pragma once
// Run manifests: every command that writes files finishes by writing
// manifest.json listing each output with its size and CRC-32.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "amsreg/bytes.hpp"

namespace amsreg {

struct ManifestOutput {
  // Relative to the manifest's directory.
  std::string path;
  std::uint64_t size = 0;
  std::string crc32;
};

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string model_checksum;
  std::string tool_version;
  std::vector<ManifestOutput> outputs;
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

inline constexpr const char* kManifestName = "manifest.json";

// Writes outputs atomically into one directory and records them.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);
  const std::filesystem::path& dir() const { return dir_; }
  void write(const std::string& name, std::span<const unsigned char> bytes);
  void write(const std::string& name, std::string_view text);
  // Writes manifest.json (last) with the recorded outputs and returns it.
  RunManifest finish(RunManifest manifest);

 private:
  std::filesystem::path dir_;
  std::vector<ManifestOutput> outputs_;
};

// Checks that every listed output exists with the recorded size and CRC.
// Returns one message per problem; empty means intact. Throws
// CorruptionError if the manifest itself cannot be parsed.
std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path);

}  // namespace amsreg
