#include "amsreg/manifest.hpp"

#include "amsreg/errors.hpp"
#include "amsreg/fileio.hpp"
#include "amsreg/schema.hpp"

namespace amsreg {

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& o : m.outputs) outputs.push_back({{"path", o.path}, {"size", o.size}, {"crc32", o.crc32}});
  return {{"schema_version", kSchemaVersion}, {"command", m.command},
          {"config", m.config},               {"seed", m.seed},
          {"model_checksum", m.model_checksum}, {"tool_version", m.tool_version},
          {"outputs", outputs}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.model_checksum = j.at("model_checksum").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    for (const auto& o : j.at("outputs")) {
      m.outputs.push_back({o.at("path").get<std::string>(), o.at("size").get<std::uint64_t>(),
                           o.at("crc32").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void ArtifactWriter::write(const std::string& name, std::span<const unsigned char> bytes) {
  write_atomic(dir_ / name, bytes);
  outputs_.push_back({name, bytes.size(), hex32(crc32_of(bytes))});
}

void ArtifactWriter::write(const std::string& name, std::string_view text) {
  write(name, std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

RunManifest ArtifactWriter::finish(RunManifest manifest) {
  manifest.outputs = outputs_;
  if (manifest.tool_version.empty()) manifest.tool_version = kToolVersion;
  write_atomic(dir_ / kManifestName, manifest_to_json(manifest).dump(2) + "\n");
  return manifest;
}

std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path) {
  const Bytes raw = read_bytes(manifest_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("manifest is not valid JSON: ") + e.what());
  }
  const RunManifest m = manifest_from_json(j);
  const auto dir = manifest_path.parent_path();
  std::vector<std::string> problems;
  for (const auto& o : m.outputs) {
    const auto p = dir / o.path;
    if (!std::filesystem::exists(p)) {
      problems.push_back("missing: " + o.path);
      continue;
    }
    const Bytes bytes = read_bytes(p);
    if (bytes.size() != o.size) {
      problems.push_back("size mismatch: " + o.path);
    } else if (hex32(crc32_of(bytes)) != o.crc32) {
      problems.push_back("crc mismatch: " + o.path);
    }
  }
  return problems;
}

}  // namespace amsreg
