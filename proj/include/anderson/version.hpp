#pragma once

namespace anderson {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace anderson
