#pragma once

namespace qncq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qncq
