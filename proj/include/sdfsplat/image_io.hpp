#pragma once

#include "sdfsplat/image.hpp"

#include <filesystem>

namespace sdfsplat {

/// 8-bit RGB PNG. Values are clamped to [0, 1] and rounded to k/255.
void write_png(const Image& img, const std::filesystem::path& path);
/// Reads 8-bit gray/RGB/RGBA PNG as a 3-channel image in [0, 1].
Image read_png(const std::filesystem::path& path);

/// PFM, float32 little-endian (scale -1). 1 or 3 channels.
void write_pfm(const Image& img, const std::filesystem::path& path);
Image read_pfm(const std::filesystem::path& path);

/// Rounds every value to float32 precision.
void quantize_to_float(Image& img);
/// Clamps to [0, 1] and rounds to multiples of 1/255.
void quantize_to_8bit(Image& img);

}  // namespace sdfsplat
