#pragma once

#include "sdfsplat/image.hpp"

namespace sdfsplat {

/// Cap used when reporting the PSNR of identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10 log10(1 / MSE). Identical images give +infinity.
double psnr(const Image& a, const Image& b);

/// Channel-averaged SSIM, 11x11 Gaussian window (sigma 1.5), mean over the
/// window positions that lie fully inside the image.
double ssim(const Image& a, const Image& b);

/// Mean |cos| between two vector images over pixels where both are nonzero
/// and `alpha` (if given) exceeds 0.5. Returns 0 when no pixel qualifies.
double normal_alignment(const Image& grad_map, const Image& normals, const Image& alpha = {});

}  // namespace sdfsplat
