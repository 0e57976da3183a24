#pragma once

namespace sharpbench {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sharpbench
