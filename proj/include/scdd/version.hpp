#pragma once

namespace scdd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace scdd
