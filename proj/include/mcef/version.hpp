#pragma once

namespace mcef {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mcef
