#pragma once

namespace mmrx {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mmrx
