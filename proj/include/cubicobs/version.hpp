#pragma once

namespace cubicobs {

inline constexpr const char* kToolName = "cubicobs";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace cubicobs
