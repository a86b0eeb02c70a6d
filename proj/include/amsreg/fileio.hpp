#pragma once

#include <filesystem>
#include <string_view>

#include "amsreg/bytes.hpp"

namespace amsreg {

Bytes read_bytes(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace amsreg
