#pragma once

#include "sdfsplat/gaussian.hpp"
#include "sdfsplat/rasterizer.hpp"
#include "sdfsplat/sdf.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace sdfsplat {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> vertex_normals;  ///< empty or one per vertex
    std::vector<Vec3> vertex_colors;   ///< empty or one per vertex, RGB in [0, 1]

    bool empty() const { return triangles.empty(); }
    /// Throws ContractViolation on out-of-range indices or attribute size mismatch.
    void validate() const;
    double area() const;
    /// V - E + F over the referenced vertices.
    long euler_characteristic() const;
    /// Every undirected edge is shared by exactly two triangles.
    bool is_watertight() const;
};

/// Triangles with area at or below this are dropped during cleanup.
inline constexpr double kDegenerateArea = 1e-12;
inline constexpr double kWeldTolerance = 1e-9;

/// Isosurface of `grid` at `iso`. Vertices above iso are inside; sentinel
/// vertices count as outside and edges touching them are cut at the midpoint.
/// Triangles wind so their normals face decreasing values (outward). Vertex
/// normals are the normalized area-weighted face normals.
TriangleMesh marching_cubes(const SdfGrid& grid, double iso = 0.0);

/// Colors each vertex from the rendering of the most front-facing camera whose
/// rendered surface depth lies within 1% of the vertex depth. Vertices no camera
/// sees take the mean of colored neighbors (0.5 gray if none is reachable).
TriangleMesh color_mesh(const TriangleMesh& mesh, const GaussianSet& gaussians, std::span<const Camera> cameras,
                        const RenderConfig& cfg = {});

/// Points drawn uniformly by area. Throws InvalidParameter for an empty mesh.
std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t n, std::mt19937_64& rng);

/// Exact nearest-neighbor queries over a fixed point set.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points);
    /// Index of the nearest point; ties go to the lower index.
    std::size_t nearest(const Vec3& q) const;
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int axis = -1;  ///< -1 for a leaf
        double split = 0.0;
        std::uint32_t begin = 0, end = 0;  ///< range in order_ for leaves
        std::uint32_t left = 0, right = 0;
    };
    std::uint32_t build(std::uint32_t begin, std::uint32_t end);
    void search(std::uint32_t node, const Vec3& q, std::size_t& best, double& best_d2) const;

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

/// Mean nearest-neighbor distance a -> b plus b -> a, halved. Throws
/// InvalidParameter when either set is empty.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b);

/// ASCII OBJ with v, vn (when present) and f records.
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
/// Binary little-endian PLY: float x,y,z,nx,ny,nz, uchar red,green,blue and a face list.
void write_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path);
/// Reads meshes written by write_mesh_ply (colors and normals restored at file precision).
TriangleMesh read_mesh_ply(const std::filesystem::path& path);

/// Binary little-endian PLY with float x,y,z,nx,ny,nz. Rejects an empty cloud.
void write_oriented_points(const OrientedPointCloud& cloud, const std::filesystem::path& path);
OrientedPointCloud read_oriented_points(const std::filesystem::path& path);

}  // namespace sdfsplat
