#include "sdfsplat/error.hpp"
#include "sdfsplat/mesh.hpp"
#include "sdfsplat/scene.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>

namespace sdfsplat {
namespace {

SdfGrid analytic_grid(int res, double half, const std::function<double(const Vec3&)>& f) {
    SdfGrid g;
    g.bounds.min = Vec3::Constant(-half);
    g.bounds.max = Vec3::Constant(half);
    g.resolution = {res, res, res};
    g.sentinel = g.bounds.diagonal();
    g.values.resize(static_cast<std::size_t>(res) * res * res);
    for (int k = 0; k < res; ++k)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i) g.values[g.index(i, j, k)] = f(g.vertex(i, j, k));
    return g;
}

TriangleMesh sphere_mesh(int res = 64, double radius = 0.5, double half = 1.0) {
    return marching_cubes(analytic_grid(res, half, [radius](const Vec3& p) { return radius - p.norm(); }));
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sdfsplat_mesh_" + name);
}

TEST(MarchingCubes, AnalyticSphere) {
    const TriangleMesh mesh = sphere_mesh();
    ASSERT_FALSE(mesh.empty());
    const double cell = 2.0 / 63.0;
    for (const Vec3& v : mesh.vertices) ASSERT_NEAR(v.norm(), 0.5, 1.5 * cell);
    EXPECT_EQ(mesh.euler_characteristic(), 2);
    EXPECT_TRUE(mesh.is_watertight());
    EXPECT_NEAR(mesh.area(), 4.0 * M_PI * 0.25, 0.02 * 4.0 * M_PI * 0.25);
}

TEST(MarchingCubes, TrianglesFaceOutward) {
    const TriangleMesh mesh = sphere_mesh(40);
    for (const auto& t : mesh.triangles) {
        const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        const Vec3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        ASSERT_GT(n.dot(c), 0.0);
    }
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        EXPECT_GT(mesh.vertex_normals[i].dot(mesh.vertices[i].normalized()), 0.9);
}

TEST(MarchingCubes, PlaneIsExact) {
    const TriangleMesh mesh = marching_cubes(analytic_grid(33, 1.0, [](const Vec3& p) { return p.z() - 0.25; }));
    ASSERT_FALSE(mesh.empty());
    for (const Vec3& v : mesh.vertices) ASSERT_NEAR(v.z(), 0.25, 1e-6);
    // Inside is above the plane, so outward normals point down.
    for (const Vec3& n : mesh.vertex_normals) EXPECT_NEAR(n.z(), -1.0, 1e-9);
    EXPECT_NEAR(mesh.area(), 4.0, 1e-9);
}

TEST(MarchingCubes, NoCrossingGivesEmptyMesh) {
    EXPECT_TRUE(marching_cubes(analytic_grid(8, 1.0, [](const Vec3&) { return 1.0; })).empty());
    EXPECT_TRUE(marching_cubes(analytic_grid(8, 1.0, [](const Vec3&) { return -1.0; })).empty());
    SdfGrid all_sentinel = analytic_grid(8, 1.0, [](const Vec3&) { return 0.0; });
    for (double& v : all_sentinel.values) v = all_sentinel.sentinel;
    EXPECT_TRUE(marching_cubes(all_sentinel).empty());
}

TEST(MarchingCubes, SentinelCountsAsOutside) {
    // Positive everywhere, but only a central blob is observed.
    SdfGrid g = analytic_grid(24, 1.0, [](const Vec3&) { return 0.3; });
    for (int k = 0; k < 24; ++k)
        for (int j = 0; j < 24; ++j)
            for (int i = 0; i < 24; ++i)
                if (g.vertex(i, j, k).norm() > 0.6) g.values[g.index(i, j, k)] = g.sentinel;
    const TriangleMesh mesh = marching_cubes(g);
    ASSERT_FALSE(mesh.empty());
    EXPECT_TRUE(mesh.is_watertight());
    EXPECT_EQ(mesh.euler_characteristic(), 2);
    for (const Vec3& v : mesh.vertices) EXPECT_LT(v.norm(), 0.6 + 2.0 / 23.0);
}

TEST(MarchingCubes, RejectsMalformedGrid) {
    SdfGrid g = analytic_grid(4, 1.0, [](const Vec3& p) { return p.x(); });
    g.values[5] = std::nan("");
    EXPECT_THROW(marching_cubes(g), ContractViolation);
    g.values.pop_back();
    EXPECT_THROW(marching_cubes(g), ContractViolation);
}

TEST(MarchingCubes, PropertyRandomClosedFieldsAreWatertight) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int res = 10;
        SdfGrid g = analytic_grid(res, 1.0, [](const Vec3&) { return 0.0; });
        for (int k = 0; k < res; ++k)
            for (int j = 0; j < res; ++j)
                for (int i = 0; i < res; ++i) {
                    const bool border = i == 0 || j == 0 || k == 0 || i == res - 1 || j == res - 1 || k == res - 1;
                    g.values[g.index(i, j, k)] = border ? -1.0 : u(rng);
                }
        const TriangleMesh mesh = marching_cubes(g);
        ASSERT_FALSE(mesh.empty());
        mesh.validate();
        EXPECT_TRUE(mesh.is_watertight()) << "trial " << trial;
        for (const auto& t : mesh.triangles) {
            const double area =
                0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
            EXPECT_GT(area, kDegenerateArea);
        }
        // Welded: no two distinct vertices closer than the tolerance.
        const KdTree tree(mesh.vertices);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const std::size_t nn = tree.nearest(mesh.vertices[i]);
            EXPECT_EQ(nn, i);
        }
    }
}

TEST(MarchingCubes, Deterministic) {
    const TriangleMesh a = sphere_mesh(30), b = sphere_mesh(30);
    ASSERT_EQ(a.vertices.size(), b.vertices.size());
    ASSERT_EQ(a.triangles, b.triangles);
    for (std::size_t i = 0; i < a.vertices.size(); ++i) EXPECT_EQ(a.vertices[i], b.vertices[i]);
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    return pts;
}

TEST(KdTree, MatchesBruteForceIncludingTies) {
    std::mt19937_64 rng(5);
    std::vector<Vec3> pts = random_points(rng, 500);
    for (int i = 0; i < 50; ++i) pts.push_back(pts[static_cast<std::size_t>(i) * 3]);  // duplicates
    std::uniform_int_distribution<int> grid(-3, 3);
    for (int i = 0; i < 100; ++i) pts.emplace_back(grid(rng) * 0.25, grid(rng) * 0.25, grid(rng) * 0.25);
    const KdTree tree(pts);
    for (const Vec3& q : random_points(rng, 300)) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if ((pts[i] - q).squaredNorm() < (pts[best] - q).squaredNorm()) best = i;
        ASSERT_EQ(tree.nearest(q), best);
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t first = i;
        for (std::size_t j = 0; j < i; ++j)
            if (pts[j] == pts[i]) {
                first = j;
                break;
            }
        ASSERT_EQ(tree.nearest(pts[i]), first);
    }
}

double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    auto one_way = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (const Vec3& p : from) {
            double best = INFINITY;
            for (const Vec3& q : to) best = std::min(best, (q - p).norm());
            sum += best;
        }
        return sum / static_cast<double>(from.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

TEST(Chamfer, MatchesExhaustivePairing) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const auto a = random_points(rng, 200 + 37 * trial);
        const auto b = random_points(rng, 150 + 11 * trial);
        EXPECT_NEAR(chamfer_distance(a, b), brute_chamfer(a, b), 1e-15);
        EXPECT_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
    }
}

TEST(Chamfer, Examples) {
    std::mt19937_64 rng(9);
    const auto a = random_points(rng, 300);
    EXPECT_EQ(chamfer_distance(a, a), 0.0);
    std::vector<Vec3> p0, p1;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            p0.emplace_back(0.1 * i, 0.1 * j, 0.0);
            p1.emplace_back(0.1 * i, 0.1 * j, 0.037);
        }
    EXPECT_NEAR(chamfer_distance(p0, p1), 0.037, 1e-15);
    EXPECT_THROW(chamfer_distance(a, std::vector<Vec3>{}), InvalidParameter);
    EXPECT_GT(chamfer_distance(a, std::vector<Vec3>(a.begin(), a.end() - 1)) + 1.0, 1.0);
}

TEST(SampleMesh, UniformByArea) {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 5), Vec3(3, 0, 5), Vec3(0, 1, 5)};
    m.triangles = {{0, 1, 2}, {3, 4, 5}};
    std::mt19937_64 rng(10);
    const auto pts = sample_mesh(m, 40000, rng);
    int upper = 0;
    for (const Vec3& p : pts) {
        if (p.z() > 2.5) {
            ++upper;
            EXPECT_LE(p.x() / 3.0 + p.y(), 1.0 + 1e-12);
        } else {
            EXPECT_LE(p.x() + p.y(), 1.0 + 1e-12);
        }
        EXPECT_GE(p.x(), 0.0);
        EXPECT_GE(p.y(), 0.0);
    }
    EXPECT_NEAR(upper / 40000.0, 0.75, 0.01);
    EXPECT_THROW(sample_mesh(TriangleMesh{}, 10, rng), InvalidParameter);
}

TEST(SampleMesh, SphereSamplesApproachAnalyticChamfer) {
    const TriangleMesh mesh = sphere_mesh(64);
    std::mt19937_64 rng(11);
    const auto on_mesh = sample_mesh(mesh, 20000, rng);
    std::vector<Vec3> on_sphere;
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 20000; ++i) on_sphere.push_back(0.5 * Vec3(n(rng), n(rng), n(rng)).normalized());
    EXPECT_LT(chamfer_distance(on_mesh, on_sphere), 0.01 * 0.5 + 0.5 * 2.0 / 63.0);
}

TEST(MeshIo, ObjRecordCounts) {
    const TriangleMesh mesh = sphere_mesh(16);
    const auto path = temp_path("sphere.obj");
    write_obj(mesh, path);
    std::ifstream in(path);
    std::string line;
    std::size_t v = 0, vn = 0, f = 0;
    while (std::getline(in, line)) {
        if (line.rfind("v ", 0) == 0) ++v;
        if (line.rfind("vn ", 0) == 0) ++vn;
        if (line.rfind("f ", 0) == 0) ++f;
    }
    EXPECT_EQ(v, mesh.vertices.size());
    EXPECT_EQ(vn, mesh.vertices.size());
    EXPECT_EQ(f, mesh.triangles.size());
}

TEST(MeshIo, PlyRoundTrip) {
    TriangleMesh mesh = sphere_mesh(16);
    mesh.vertex_colors.assign(mesh.vertices.size(), Vec3(1.0, 0.2, 0.0));
    const auto path = temp_path("sphere.ply");
    write_mesh_ply(mesh, path);
    const TriangleMesh back = read_mesh_ply(path);
    ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
    EXPECT_EQ(back.triangles, mesh.triangles);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(back.vertices[i][k], static_cast<double>(static_cast<float>(mesh.vertices[i][k])));
            EXPECT_EQ(back.vertex_normals[i][k], static_cast<double>(static_cast<float>(mesh.vertex_normals[i][k])));
        }
        EXPECT_NEAR((back.vertex_colors[i] - Vec3(1.0, 51.0 / 255.0, 0.0)).norm(), 0.0, 1e-12);
    }
}

TEST(OrientedPoints, RoundTripIsBitIdentical) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0.0, 1.0);
    OrientedPointCloud cloud;
    for (int i = 0; i < 1000; ++i) {
        Vec3 p(n(rng), n(rng), n(rng));
        Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
        for (int k = 0; k < 3; ++k) {
            p[k] = static_cast<float>(p[k]);
            d[k] = static_cast<float>(d[k]);
        }
        cloud.positions.push_back(p);
        cloud.normals.push_back(d);
    }
    const auto path = temp_path("points.ply");
    write_oriented_points(cloud, path);
    const OrientedPointCloud back = read_oriented_points(path);
    ASSERT_EQ(back.size(), cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        EXPECT_EQ(back.positions[i], cloud.positions[i]);
        EXPECT_EQ(back.normals[i], cloud.normals[i]);
    }
}

TEST(OrientedPoints, EmptyCloudRejected) {
    EXPECT_THROW(write_oriented_points(OrientedPointCloud{}, temp_path("empty.ply")), InvalidParameter);
}

TEST(OrientedPoints, HeaderListsOnlyPositionAndNormal) {
    OrientedPointCloud cloud;
    cloud.positions = {Vec3(1, 2, 3)};
    cloud.normals = {Vec3(0, 0, 1)};
    const auto path = temp_path("one.ply");
    write_oriented_points(cloud, path);
    std::ifstream in(path, std::ios::binary);
    std::string header, line;
    while (std::getline(in, line) && line != "end_header") header += line + "\n";
    EXPECT_EQ(header,
              "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
              "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n");
    EXPECT_EQ(std::filesystem::file_size(path), header.size() + std::string("end_header\n").size() + 24u);
}

struct ColorFixture {
    GaussianSet gaussians;
    std::vector<Camera> cameras;
    SceneGeometry geometry;
};

ColorFixture color_fixture(bool textured) {
    SceneOptions opt;
    opt.kind = textured ? SceneKind::TexturedSphere : SceneKind::Sphere;
    opt.n_cameras = 12;
    opt.resolution = 96;
    opt.supersample = 1;
    const SceneDataset scene = generate_synthetic_scene(opt);
    ColorFixture f;
    f.cameras = scene.cameras;
    f.geometry = scene.geometry;
    f.gaussians = testing::surfel_sphere(6000, 1.0, Vec3::Zero(), Vec3(0.9, 0.05, 0.05));
    if (textured)
        for (auto& g : f.gaussians.items)
            g.sh.row(0) = ((f.geometry.albedo(0, g.mean) - Vec3::Constant(kColorOffset)) / kShC0).transpose();
    return f;
}

TEST(ColorMesh, UniformRedSphere) {
    const ColorFixture f = color_fixture(false);
    const TriangleMesh mesh = sphere_mesh(40, 1.0, 1.3);
    const TriangleMesh colored = color_mesh(mesh, f.gaussians, f.cameras);
    ASSERT_EQ(colored.vertex_colors.size(), mesh.vertices.size());
    for (const Vec3& c : colored.vertex_colors) ASSERT_LT((c - Vec3(0.9, 0.05, 0.05)).norm(), 0.05);
}

TEST(ColorMesh, HiddenVertexTakesNeighborMean) {
    const ColorFixture f = color_fixture(false);
    TriangleMesh mesh = sphere_mesh(32, 1.0, 1.3);
    const std::size_t hidden = mesh.vertices.size() / 2;
    mesh.vertices[hidden] *= 0.5;  // pushed inside the opaque sphere
    const TriangleMesh colored = color_mesh(mesh, f.gaussians, f.cameras);
    EXPECT_LT((colored.vertex_colors[hidden] - Vec3(0.9, 0.05, 0.05)).norm(), 0.05);

    // A component no camera sees and that touches nothing colored falls back to gray.
    TriangleMesh island = mesh;
    const int base = static_cast<int>(island.vertices.size());
    island.vertices.insert(island.vertices.end(), {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0, 0.1, 0)});
    island.vertex_normals.insert(island.vertex_normals.end(), 3, Vec3::UnitZ());
    island.triangles.push_back({base, base + 1, base + 2});
    const TriangleMesh c2 = color_mesh(island, f.gaussians, f.cameras);
    EXPECT_EQ(c2.vertex_colors[static_cast<std::size_t>(base)], Vec3::Constant(0.5));
}

TEST(ColorMesh, TexturedSphereMatchesAnalyticAlbedo) {
    const ColorFixture f = color_fixture(true);
    const TriangleMesh mesh = sphere_mesh(48, 1.0, 1.3);
    const TriangleMesh colored = color_mesh(mesh, f.gaussians, f.cameras);
    std::size_t good = 0;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 truth = f.geometry.albedo(0, mesh.vertices[i].normalized());
        if ((colored.vertex_colors[i] - truth).cwiseAbs().maxCoeff() <= 0.05) ++good;
    }
    EXPECT_GE(static_cast<double>(good) / mesh.vertices.size(), 0.9);
}

}  // namespace
}  // namespace sdfsplat
