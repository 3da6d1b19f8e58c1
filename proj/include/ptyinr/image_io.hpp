#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace ptyinr {

/// 8-bit grayscale PNG; values map linearly from [lo, hi] and clamp.
std::vector<unsigned char> encode_gray_png(std::span<const double> img, int rows, int cols,
                                           double lo, double hi);

/// 8-bit RGB PNG with a warm black-red-yellow-white ramp over [lo, hi].
std::vector<unsigned char> encode_warm_png(std::span<const double> img, int rows, int cols,
                                           double lo, double hi);

void write_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace ptyinr
