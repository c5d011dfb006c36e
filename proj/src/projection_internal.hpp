#pragma once

#include "sdfsplat/gaussian.hpp"

namespace sdfsplat::detail {

using Mat23 = Eigen::Matrix<double, 2, 3>;

inline Mat3 covariance(const Mat3& r, const Vec3& log_scale) {
    const Vec3 var = (2.0 * log_scale).array().exp();
    return r * var.asDiagonal() * r.transpose();
}

/// Jacobian of the pinhole projection at a view-space point.
inline Mat23 projection_jacobian(const Vec3& view, const Camera& cam) {
    const double iz = 1.0 / view.z();
    Mat23 j;
    j << cam.fx * iz, 0.0, -cam.fx * view.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * view.y() * iz * iz;
    return j;
}

struct Projection {
    Vec2 mean2d;
    Mat2 cov2d;
    Mat23 jacobian;
};

inline Projection project(const Vec3& view, const Mat3& cov3d, const Camera& cam) {
    Projection out;
    out.mean2d = Vec2(cam.fx * view.x() / view.z() + cam.cx, cam.fy * view.y() / view.z() + cam.cy);
    out.jacobian = projection_jacobian(view, cam);
    const Mat3 cov_view = cam.rotation * cov3d * cam.rotation.transpose();
    out.cov2d = out.jacobian * cov_view * out.jacobian.transpose();
    out.cov2d(0, 0) += kAntiAliasDilation;
    out.cov2d(1, 1) += kAntiAliasDilation;
    // Exact symmetry keeps the conic symmetric.
    out.cov2d(1, 0) = out.cov2d(0, 1);
    return out;
}

}  // namespace sdfsplat::detail
