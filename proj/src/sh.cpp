#include "sdfsplat/gaussian.hpp"

#include <algorithm>

namespace sdfsplat {
namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277, -0.5900435899266435};

}  // namespace

std::array<double, kShBasisCount> sh_basis(const Vec3& dir) {
    std::array<double, kShBasisCount> b{};
    std::array<Vec3, kShBasisCount> unused;
    sh_basis_with_gradient(dir, b, unused);
    return b;
}

void sh_basis_with_gradient(const Vec3& dir, std::array<double, kShBasisCount>& b,
                            std::array<Vec3, kShBasisCount>& g) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    const double xx = x * x, yy = y * y, zz = z * z;

    b[0] = kShC0;
    g[0] = Vec3::Zero();

    b[1] = -kC1 * y;
    g[1] = Vec3(0.0, -kC1, 0.0);
    b[2] = kC1 * z;
    g[2] = Vec3(0.0, 0.0, kC1);
    b[3] = -kC1 * x;
    g[3] = Vec3(-kC1, 0.0, 0.0);

    b[4] = kC2[0] * x * y;
    g[4] = kC2[0] * Vec3(y, x, 0.0);
    b[5] = kC2[1] * y * z;
    g[5] = kC2[1] * Vec3(0.0, z, y);
    b[6] = kC2[2] * (2.0 * zz - xx - yy);
    g[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
    b[7] = kC2[3] * x * z;
    g[7] = kC2[3] * Vec3(z, 0.0, x);
    b[8] = kC2[4] * (xx - yy);
    g[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);

    b[9] = kC3[0] * y * (3.0 * xx - yy);
    g[9] = kC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
    b[10] = kC3[1] * x * y * z;
    g[10] = kC3[1] * Vec3(y * z, x * z, x * y);
    b[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    g[11] = kC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
    b[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    g[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    g[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
    b[14] = kC3[5] * z * (xx - yy);
    g[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
    b[15] = kC3[6] * x * (xx - 3.0 * yy);
    g[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
}

Vec3 sh_to_color(const ShCoeffs& sh, const Vec3& view_dir, int degree) {
    const auto basis = sh_basis(view_dir);
    const int count = sh_basis_count(std::clamp(degree, 0, kMaxShDegree));
    Vec3 color = Vec3::Constant(kColorOffset);
    for (int k = 0; k < count; ++k) color += basis[k] * sh.row(k).transpose();
    return color;
}

}  // namespace sdfsplat
