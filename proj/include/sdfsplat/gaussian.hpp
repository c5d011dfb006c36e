#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace sdfsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Spherical-harmonic color coefficients: row k is basis function k (degree <= 3),
/// columns are the RGB channels.
using ShCoeffs = Eigen::Matrix<double, 16, 3>;

inline constexpr int kMaxShDegree = 3;
inline constexpr int kShBasisCount = 16;
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kColorOffset = 0.5;

/// Screen-space variance (px^2) added to every projected covariance.
inline constexpr double kAntiAliasDilation = 0.3;

/// Two scale components closer than this are considered equal.
inline constexpr double kScaleTieTolerance = 1e-9;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Number of SH basis functions used up to and including `degree`.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

struct Gaussian {
    Vec3 mean = Vec3::Zero();
    /// Versor stored as (w, x, y, z).
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
    /// Natural log of the per-axis standard deviations.
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    ShCoeffs sh = ShCoeffs::Zero();

    double opacity() const { return sigmoid(opacity_logit); }
    Vec3 scale() const { return log_scale.array().exp(); }
};

struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool empty() const { return !(min.array() <= max.array()).all(); }
    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    double diagonal() const { return empty() ? 0.0 : extent().norm(); }
    bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    /// Grows the box about its center by `fraction` of its extent on every side.
    Aabb inflated(double fraction) const;
};

/// Pinhole camera. Pixel (x, y) covers [x, x+1) x [y, y+1); its center sits at
/// (x + 0.5, y + 0.5). View space has +x right, +y down and +z forward.
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    /// world_to_view: x_view = rotation * x_world + translation.
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double near = 0.01;
    double far = 100.0;

    Vec3 to_view(const Vec3& world) const { return rotation * world + translation; }
    /// Camera center in world coordinates.
    Vec3 center() const { return -rotation.transpose() * translation; }
    /// Throws InvalidParameter when the rigid transform or clip planes are malformed.
    void validate() const;

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, int width,
                          int height);
};

/// Ordered collection of Gaussians. The scene bounds are derived from the
/// means on demand, so they always contain every mean.
struct GaussianSet {
    std::vector<Gaussian> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    Aabb scene_bounds() const;
    /// Radius of the smallest sphere around the bounds center containing all means.
    double extent_radius() const;
};

/// Rotation matrix of the normalized versor (w, x, y, z).
Mat3 rotation_matrix(const Vec4& q);

/// Sigma = R * diag(exp(log_scale))^2 * R^T.
/// Throws InvalidParameter for non-finite input or a rotation not unit-norm within 1e-6.
Mat3 covariance_from_rs(const Vec4& rotation, const Vec3& log_scale);

/// exp(-0.5 (p - mean)^T Sigma^-1 (p - mean)).
double evaluate_gaussian(const Gaussian& g, const Vec3& p);

struct ScreenSplat {
    Vec2 mean2d;
    /// EWA covariance plus the anti-alias dilation, px^2.
    Mat2 cov2d;
    /// View-space z.
    double depth = 0.0;
};

/// EWA projection. Returns nullopt when the center is not strictly between the
/// near and far planes.
std::optional<ScreenSplat> project_to_screen(const Gaussian& g, const Camera& cam);

/// Index of the smallest scale axis; ties within kScaleTieTolerance go to the lower index.
int smallest_axis(const Vec3& log_scale);

/// Rotation column of the smallest scale axis, world frame, unit length.
Vec3 gradient_proxy(const Gaussian& g);

/// Real SH basis values up to degree 3 for a unit direction.
std::array<double, kShBasisCount> sh_basis(const Vec3& dir);

/// Basis values and their partial derivatives with respect to the (unnormalized)
/// direction components.
void sh_basis_with_gradient(const Vec3& dir, std::array<double, kShBasisCount>& basis,
                            std::array<Vec3, kShBasisCount>& gradient);

/// View-dependent color: SH expansion + 0.5, not clamped.
Vec3 sh_to_color(const ShCoeffs& sh, const Vec3& view_dir, int degree = kMaxShDegree);

}  // namespace sdfsplat
