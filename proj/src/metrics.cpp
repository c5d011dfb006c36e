#include "sdfsplat/metrics.hpp"

#include "sdfsplat/error.hpp"
#include "ssim_internal.hpp"

#include <cmath>
#include <limits>

namespace sdfsplat {

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b) || a.empty()) throw ContractViolation("psnr: image shapes differ or are empty");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) { return detail::ssim_kernel(a, b, nullptr); }

double normal_alignment(const Image& grad_map, const Image& normals, const Image& alpha) {
    if (!grad_map.same_shape(normals) || grad_map.channels != 3)
        throw ContractViolation("normal_alignment: shape mismatch");
    if (!alpha.empty() && alpha.pixel_count() != grad_map.pixel_count())
        throw ContractViolation("normal_alignment: alpha shape mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < grad_map.pixel_count(); ++p) {
        if (!alpha.empty() && !(alpha.data[p] > 0.5)) continue;
        const double* g = &grad_map.data[3 * p];
        const double* n = &normals.data[3 * p];
        const double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        const double nn = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
        if (!(gn > 1e-8) || !(nn > 1e-8)) continue;
        sum += std::abs(g[0] * n[0] + g[1] * n[1] + g[2] * n[2]) / (gn * nn);
        ++count;
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace sdfsplat
