#pragma once

namespace rem {

inline constexpr const char* kToolName = "remtool";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace rem
