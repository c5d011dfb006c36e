#pragma once

#include "sdfsplat/gaussian.hpp"
#include "sdfsplat/image.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sdfsplat {

enum class SceneKind { Sphere, Box, TwoSpheres, TexturedSphere };

/// Throws InvalidParameter for unknown names.
SceneKind parse_scene_kind(const std::string& name);
const char* scene_kind_name(SceneKind kind);

/// Analytic solid used to synthesize ground truth.
struct Primitive {
    enum class Shape { Sphere, Box };
    Shape shape = Shape::Sphere;
    Vec3 center = Vec3::Zero();
    /// Sphere: x holds the radius. Box: half extents in the local frame.
    Vec3 half_extent = Vec3::Ones();
    /// World-from-local rotation.
    Mat3 orientation = Mat3::Identity();
    Vec3 albedo = Vec3::Constant(0.7);
    bool textured = false;

    double radius() const { return half_extent.x(); }
};

struct RayHit {
    double t = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();  ///< outward, world frame
    int primitive = -1;
};

struct SceneGeometry {
    std::vector<Primitive> primitives;
    Vec3 light_dir = Vec3(0.3, -0.4, 0.866).normalized();  ///< toward the light
    double ambient = 0.35;

    bool empty() const { return primitives.empty(); }
    std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir) const;
    /// Surface albedo at a point on primitive `index`.
    Vec3 albedo(int index, const Vec3& point) const;
    /// Outgoing radiance (view independent): albedo * (ambient + (1 - ambient) max(0, n.l)).
    Vec3 radiance(int index, const Vec3& point, const Vec3& normal) const;
    /// Exact distance to the union surface, negative inside. Sphere and box only.
    double signed_distance(const Vec3& p) const;
    /// Area-uniform samples on the visible (union) surface.
    std::vector<Vec3> sample_surface(std::size_t n, std::mt19937_64& rng) const;
    Aabb bounds() const;
};

/// Per-camera data plus the train / held-out split. Optional channels are
/// either empty for every camera or present for every camera.
struct SceneDataset {
    std::vector<Camera> cameras;
    std::vector<Image> images;       ///< H x W x 3 in [0, 1]
    std::vector<Image> normal_maps;  ///< H x W x 3 camera frame, zero vector where undefined
    std::vector<Image> depth_maps;   ///< H x W view-space z, 0 where undefined
    std::vector<int> train;
    std::vector<int> held_out;
    SceneGeometry geometry;  ///< empty for datasets without analytic ground truth

    std::size_t size() const { return cameras.size(); }
    bool has_normals() const { return !normal_maps.empty(); }
    bool has_depth() const { return !depth_maps.empty(); }
    /// Throws FormatError naming the offending camera.
    void validate() const;
};

/// Every 8th camera, starting at 0, is held out.
void assign_split(SceneDataset& scene);

struct SceneOptions {
    SceneKind kind = SceneKind::Sphere;
    int n_cameras = 24;
    int resolution = 128;
    std::uint64_t seed = 0;
    double fov_degrees = 50.0;
    /// Camera distance from the origin; 0 picks a per-kind default.
    double camera_distance = 0.0;
    int supersample = 3;
    /// Applied to geometry, light and cameras together.
    Mat3 world_rotation = Mat3::Identity();
};

SceneDataset generate_synthetic_scene(const SceneOptions& options);

/// Layout: cameras.json, images/NNN.png, depth/NNN.pfm, normals/NNN.pfm.
void save_scene(const SceneDataset& scene, const std::filesystem::path& dir);
SceneDataset load_scene(const std::filesystem::path& dir);

}  // namespace sdfsplat
