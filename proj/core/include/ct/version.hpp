#pragma once

namespace ct {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ct
