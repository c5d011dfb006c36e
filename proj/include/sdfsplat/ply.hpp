#pragma once

#include "sdfsplat/gaussian.hpp"

#include <filesystem>

namespace sdfsplat {

/// Binary little-endian PLY in the common splatting layout: x y z nx ny nz
/// f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3, all float32.
/// f_rest is channel-major (all red coefficients, then green, then blue).
void save_gaussians(const GaussianSet& set, const std::filesystem::path& path);

/// Properties are matched by name. f_rest may hold 0, 9, 24 or 45 values;
/// missing higher-order coefficients are zero. Rotations are renormalized.
GaussianSet load_gaussians(const std::filesystem::path& path);

}  // namespace sdfsplat
