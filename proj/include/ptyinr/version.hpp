#pragma once

namespace ptyinr {

inline constexpr const char* kVersion = "0.1.0";
/// Container / checkpoint format revision.
inline constexpr int kFormatVersion = 1;

}  // namespace ptyinr
