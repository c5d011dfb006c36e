#pragma once

#include "sdfsplat/image.hpp"

namespace sdfsplat::detail {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM of x against y. When `grad_x` is non-null it receives dSSIM/dx.
double ssim_kernel(const Image& x, const Image& y, Image* grad_x);

}  // namespace sdfsplat::detail
