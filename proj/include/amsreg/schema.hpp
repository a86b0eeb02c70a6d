#pragma once

namespace amsreg {

// Version stamped into every JSON document the toolkit writes.
inline constexpr int kSchemaVersion = 1;

}  // namespace amsreg

namespace amsreg {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace amsreg
