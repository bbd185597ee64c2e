#pragma once

namespace qtasep {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qtasep
