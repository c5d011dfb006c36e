#include "sdfsplat/gaussian.hpp"

#include "projection_internal.hpp"
#include "sdfsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdfsplat {

Aabb Aabb::inflated(double fraction) const {
    if (empty()) return *this;
    const Vec3 pad = extent() * fraction;
    return Aabb{min - pad, max + pad};
}

void Camera::validate() const {
    if (!(fx > 0.0 && fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy))
        throw InvalidParameter("camera intrinsics must be finite with positive focal lengths");
    if (width <= 0 || height <= 0) throw InvalidParameter("camera image size must be positive");
    if (!(near > 0.0 && near < far)) throw InvalidParameter("camera clip planes must satisfy 0 < near < far");
    if (!rotation.allFinite() || !translation.allFinite()) throw InvalidParameter("camera transform is not finite");
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6)
        throw InvalidParameter("camera rotation is not a proper rotation (orthonormal, det +1)");
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, int width,
                       int height) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 down = -up.normalized();
    if (down.cross(forward).norm() < 1e-6) down = std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 right = down.cross(forward).normalized();
    const Vec3 true_down = forward.cross(right);

    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.width = width;
    cam.height = height;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = true_down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

Aabb GaussianSet::scene_bounds() const {
    Aabb box;
    for (const auto& g : items) box.expand(g.mean);
    return box;
}

double GaussianSet::extent_radius() const {
    const Aabb box = scene_bounds();
    if (box.empty()) return 0.0;
    const Vec3 c = box.center();
    double r = 0.0;
    for (const auto& g : items) r = std::max(r, (g.mean - c).norm());
    return r;
}

Mat3 rotation_matrix(const Vec4& q_in) {
    const Vec4 q = q_in.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 covariance_from_rs(const Vec4& rotation, const Vec3& log_scale) {
    if (!rotation.allFinite() || !log_scale.allFinite())
        throw InvalidParameter("covariance_from_rs: non-finite rotation or log-scale");
    if (std::abs(rotation.norm() - 1.0) > 1e-6)
        throw InvalidParameter("covariance_from_rs: rotation is not unit-norm");
    return detail::covariance(rotation_matrix(rotation), log_scale);
}

double evaluate_gaussian(const Gaussian& g, const Vec3& p) {
    if (!p.allFinite() || !g.mean.allFinite() || !g.rotation.allFinite() || !g.log_scale.allFinite())
        throw InvalidParameter("evaluate_gaussian: non-finite input");
    // Sigma^-1 = R diag(exp(-2 s)) R^T, evaluated in the Gaussian's local frame.
    const Vec3 local = rotation_matrix(g.rotation).transpose() * (p - g.mean);
    const Vec3 inv_var = (-2.0 * g.log_scale).array().exp();
    return std::exp(-0.5 * local.cwiseProduct(local).dot(inv_var));
}

std::optional<ScreenSplat> project_to_screen(const Gaussian& g, const Camera& cam) {
    const Mat3 cov3d = detail::covariance(rotation_matrix(g.rotation), g.log_scale);
    const Vec3 view = cam.to_view(g.mean);
    if (!(view.z() > cam.near && view.z() < cam.far)) return std::nullopt;
    const auto proj = detail::project(view, cov3d, cam);
    return ScreenSplat{proj.mean2d, proj.cov2d, view.z()};
}

int smallest_axis(const Vec3& log_scale) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
        if (log_scale[k] < log_scale[best] - kScaleTieTolerance) best = k;
    }
    return best;
}

Vec3 gradient_proxy(const Gaussian& g) { return rotation_matrix(g.rotation).col(smallest_axis(g.log_scale)); }

}  // namespace sdfsplat
