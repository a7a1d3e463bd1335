#pragma once

namespace spinner {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spinner
