#pragma once

// Checkpoint container, version 1:
//
//   "AMSRCKPT"              8-byte magic
//   u32 version             little-endian
//   u64 header_length
//   header                  UTF-8 JSON: schema_version, dtype ("f32"|"f64"),
//                           architecture, tensors[{name, shape, offset,
//                           nbytes, crc32}]
//   payload                 raw little-endian parameter buffers; offsets are
//                           relative to the start of the payload
//   u32 crc32               over every preceding byte
//
// Any mismatch on load raises CorruptionError.

#include <filesystem>
#include <variant>

#include <json.hpp>

#include "amsreg/bytes.hpp"
#include "amsreg/model.hpp"

namespace amsreg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using AnyModel = std::variant<Model<float>, Model<double>>;

nlohmann::json architecture_to_json(const ArchitectureConfig& config);
ArchitectureConfig architecture_from_json(const nlohmann::json& j);

template <typename T>
Bytes encode_checkpoint(const Model<T>& model);
AnyModel decode_checkpoint(std::span<const unsigned char> bytes);

// Atomic write (temp file + rename).
template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path);
AnyModel load_checkpoint(const std::filesystem::path& path);

// Loads and converts to the requested precision.
template <typename T>
Model<T> load_checkpoint_as(const std::filesystem::path& path);

std::string model_checksum(const AnyModel& model);

}  // namespace amsreg
