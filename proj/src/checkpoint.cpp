#include "amsreg/checkpoint.hpp"

#include <cstring>

#include "amsreg/fileio.hpp"

namespace amsreg {

namespace {

constexpr char kMagic[8] = {'A', 'M', 'S', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
constexpr const char* dtype_tag() {
  return sizeof(T) == 8 ? "f64" : "f32";
}

template <typename T>
Model<T> decode_params(const nlohmann::json& header, std::span<const unsigned char> payload) {
  const ArchitectureConfig config = architecture_from_json(header.at("architecture"));
  Model<T> model = Model<T>::zeros(config);
  const auto& entries = header.at("tensors");
  const auto& layout = model.layout();
  if (entries.size() != layout.size()) throw CorruptionError("checkpoint tensor count does not match architecture");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != layout[i].name || e.at("shape").get<Shape>() != layout[i].shape) {
      throw CorruptionError("checkpoint manifest entry " + std::to_string(i) + " does not match architecture");
    }
    const auto offset = e.at("offset").get<std::size_t>();
    const auto nbytes = e.at("nbytes").get<std::size_t>();
    if (nbytes != shape_numel(layout[i].shape) * sizeof(T) || offset + nbytes > payload.size()) {
      throw CorruptionError("checkpoint buffer bounds invalid for " + layout[i].name);
    }
    const auto buffer = payload.subspan(offset, nbytes);
    if (hex32(crc32_of(buffer)) != e.at("crc32").get<std::string>()) {
      throw CorruptionError("checksum mismatch for " + layout[i].name);
    }
    auto dst = model.parameters()[i].mutable_values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = read_le<T>(buffer, j * sizeof(T));
  }
  return model;
}

}  // namespace

nlohmann::json architecture_to_json(const ArchitectureConfig& config) {
  return {{"preset", config.preset},
          {"input_shape", config.input_shape},
          {"num_classes", config.num_classes},
          {"hidden", config.hidden},
          {"kernel", config.kernel}};
}

ArchitectureConfig architecture_from_json(const nlohmann::json& j) {
  try {
    ArchitectureConfig c;
    c.preset = j.at("preset").get<std::string>();
    c.input_shape = j.at("input_shape").get<Shape>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.hidden = j.value("hidden", std::vector<std::size_t>{});
    c.kernel = j.value("kernel", std::size_t{5});
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid architecture: ") + e.what());
  }
}

template <typename T>
Bytes encode_checkpoint(const Model<T>& model) {
  Bytes payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const std::size_t offset = payload.size();
    for (T v : model.parameters()[i].values()) append_le(payload, v);
    const std::span<const unsigned char> buffer(payload.data() + offset, payload.size() - offset);
    tensors.push_back({{"name", model.layout()[i].name},
                       {"shape", model.layout()[i].shape},
                       {"offset", offset},
                       {"nbytes", buffer.size()},
                       {"crc32", hex32(crc32_of(buffer))}});
  }
  const nlohmann::json header = {{"schema_version", kCheckpointVersion},
                                 {"dtype", dtype_tag<T>()},
                                 {"architecture", architecture_to_json(model.config())},
                                 {"tensors", tensors}};
  const std::string header_text = header.dump();

  Bytes out(std::begin(kMagic), std::end(kMagic));
  append_le(out, kCheckpointVersion);
  append_le(out, static_cast<std::uint64_t>(header_text.size()));
  out.insert(out.end(), header_text.begin(), header_text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  append_le(out, crc32_of(out));
  return out;
}

AnyModel decode_checkpoint(std::span<const unsigned char> bytes) {
  constexpr std::size_t kFixed = sizeof kMagic + 4 + 8;
  if (bytes.size() < kFixed + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CorruptionError("not a checkpoint (bad magic or too short)");
  }
  const std::size_t body = bytes.size() - 4;
  if (read_le<std::uint32_t>(bytes, body) != crc32_of(bytes.first(body))) {
    throw CorruptionError("checkpoint checksum mismatch");
  }
  if (read_le<std::uint32_t>(bytes, sizeof kMagic) != kCheckpointVersion) {
    throw CorruptionError("unsupported checkpoint version");
  }
  const auto header_len = read_le<std::uint64_t>(bytes, sizeof kMagic + 4);
  if (header_len > body - kFixed) throw CorruptionError("checkpoint header length out of range");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kFixed, bytes.begin() + kFixed + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint header unreadable: ") + e.what());
  }
  const auto payload = bytes.subspan(kFixed + header_len, body - kFixed - header_len);
  try {
    const std::string dtype = header.at("dtype").get<std::string>();
    if (dtype == "f32") return decode_params<float>(header, payload);
    if (dtype == "f64") return decode_params<double>(header, payload);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint header malformed: ") + e.what());
  }
  throw CorruptionError("unknown checkpoint dtype");
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  write_atomic(path, encode_checkpoint(model));
}

AnyModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_bytes(path));
}

template <typename T>
Model<T> load_checkpoint_as(const std::filesystem::path& path) {
  return std::visit([](const auto& m) { return m.template cast<T>(); }, load_checkpoint(path));
}

std::string model_checksum(const AnyModel& model) {
  return std::visit([](const auto& m) { return m.checksum(); }, model);
}

template Bytes encode_checkpoint(const Model<float>&);
template Bytes encode_checkpoint(const Model<double>&);
template void save_checkpoint(const Model<float>&, const std::filesystem::path&);
template void save_checkpoint(const Model<double>&, const std::filesystem::path&);
template Model<float> load_checkpoint_as<float>(const std::filesystem::path&);
template Model<double> load_checkpoint_as<double>(const std::filesystem::path&);

}  // namespace amsreg
