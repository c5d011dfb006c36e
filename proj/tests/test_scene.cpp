#include "sdfsplat/error.hpp"
#include "sdfsplat/image_io.hpp"
#include "sdfsplat/ply.hpp"
#include "sdfsplat/rasterizer.hpp"
#include "sdfsplat/scene.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>

namespace sdfsplat {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("sdfsplat_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SceneOptions small_options(SceneKind kind = SceneKind::Sphere) {
    SceneOptions opt;
    opt.kind = kind;
    opt.n_cameras = 9;
    opt.resolution = 33;
    opt.seed = 3;
    opt.supersample = 2;
    return opt;
}

TEST(SceneKindNames, ParseAndReject) {
    for (auto k : {SceneKind::Sphere, SceneKind::Box, SceneKind::TwoSpheres, SceneKind::TexturedSphere})
        EXPECT_EQ(parse_scene_kind(scene_kind_name(k)), k);
    EXPECT_THROW(parse_scene_kind("torus"), InvalidParameter);
}

TEST(Generator, SphereNormalsAreUnitAndFaceTheCamera) {
    const SceneDataset scene = generate_synthetic_scene(small_options());
    int covered = 0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Camera& cam = scene.cameras[i];
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) {
                const Vec3 n(scene.normal_maps[i](x, y, 0), scene.normal_maps[i](x, y, 1), scene.normal_maps[i](x, y, 2));
                if (scene.depth_maps[i](x, y) == 0.0) {
                    EXPECT_EQ(n.norm(), 0.0);
                    continue;
                }
                ++covered;
                EXPECT_NEAR(n.norm(), 1.0, 1e-6);
                // Camera-space ray toward the pixel; the visible surface faces back along it.
                const Vec3 ray((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
                EXPECT_GT(n.dot(-ray), 0.0);
            }
    }
    EXPECT_GT(covered, 0);
}

TEST(Generator, CenterDepthOfOnAxisCamera) {
    const SceneDataset scene = generate_synthetic_scene(small_options());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const double d = scene.cameras[i].center().norm();
        EXPECT_NEAR(scene.depth_maps[i](16, 16), d - 1.0, 1e-6);
    }
}

TEST(Generator, SameSeedIsBitIdentical) {
    const SceneDataset a = generate_synthetic_scene(small_options(SceneKind::TwoSpheres));
    const SceneDataset b = generate_synthetic_scene(small_options(SceneKind::TwoSpheres));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.images[i].data, b.images[i].data);
        EXPECT_EQ(a.depth_maps[i].data, b.depth_maps[i].data);
        EXPECT_EQ(a.normal_maps[i].data, b.normal_maps[i].data);
        EXPECT_EQ(a.cameras[i].rotation, b.cameras[i].rotation);
    }
    SceneOptions other = small_options(SceneKind::TwoSpheres);
    other.seed = 4;
    EXPECT_NE(generate_synthetic_scene(other).cameras[0].translation, a.cameras[0].translation);
}

TEST(Generator, EveryEighthCameraIsHeldOut) {
    SceneOptions opt = small_options();
    opt.n_cameras = 24;
    opt.resolution = 8;
    opt.supersample = 1;
    const SceneDataset scene = generate_synthetic_scene(opt);
    EXPECT_EQ(scene.held_out, (std::vector<int>{0, 8, 16}));
    EXPECT_EQ(scene.train.size(), 21u);
}

TEST(Generator, RejectsTooFewCameras) {
    SceneOptions opt = small_options();
    opt.n_cameras = 1;
    EXPECT_THROW(generate_synthetic_scene(opt), InvalidParameter);
}

TEST(Generator, NormalMapsInvariantUnderGlobalRotation) {
    std::mt19937_64 rng(21);
    for (auto kind : {SceneKind::Box, SceneKind::TwoSpheres}) {
        SceneOptions opt = small_options(kind);
        const SceneDataset base = generate_synthetic_scene(opt);
        opt.world_rotation = rotation_matrix(testing::random_versor(rng));
        const SceneDataset rotated = generate_synthetic_scene(opt);
        for (std::size_t i = 0; i < base.size(); ++i) {
            EXPECT_LT(testing::max_abs_diff(base.normal_maps[i], rotated.normal_maps[i]), 1e-6);
            EXPECT_LT(testing::max_abs_diff(base.depth_maps[i], rotated.depth_maps[i]), 1e-5);
            EXPECT_LE(testing::max_abs_diff(base.images[i], rotated.images[i]), 1.0 / 255.0 + 1e-12);
        }
    }
}

TEST(Geometry, SignedDistanceAndSurfaceSamples) {
    const SceneDataset scene = generate_synthetic_scene(small_options(SceneKind::Box));
    std::mt19937_64 rng(1);
    for (const Vec3& p : scene.geometry.sample_surface(500, rng))
        EXPECT_NEAR(scene.geometry.signed_distance(p), 0.0, 1e-12);
    EXPECT_LT(scene.geometry.signed_distance(Vec3::Zero()), 0.0);
    EXPECT_GT(scene.geometry.signed_distance(Vec3(3, 0, 0)), 0.0);
}

TEST(ImageIo, PngAndPfmRoundTrip) {
    const fs::path dir = scratch_dir("imageio");
    std::mt19937_64 rng(2);
    Image rgb = testing::random_image(rng, 13, 7, 3);
    quantize_to_8bit(rgb);
    write_png(rgb, dir / "a.png");
    EXPECT_EQ(read_png(dir / "a.png").data, rgb.data);

    for (int channels : {1, 3}) {
        Image f = testing::random_image(rng, 9, 5, channels, -10.0, 10.0);
        quantize_to_float(f);
        write_pfm(f, dir / "a.pfm");
        const Image back = read_pfm(dir / "a.pfm");
        EXPECT_EQ(back.channels, channels);
        EXPECT_EQ(back.data, f.data);
    }
    EXPECT_THROW(read_pfm(dir / "missing.pfm"), IoError);
}

TEST(SceneIo, SaveLoadRoundTripIsLossless) {
    const fs::path dir = scratch_dir("roundtrip");
    const SceneDataset scene = generate_synthetic_scene(small_options(SceneKind::TexturedSphere));
    save_scene(scene, dir);
    const SceneDataset back = load_scene(dir);
    ASSERT_EQ(back.size(), scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        EXPECT_EQ(back.images[i].data, scene.images[i].data);
        EXPECT_EQ(back.depth_maps[i].data, scene.depth_maps[i].data);
        EXPECT_EQ(back.normal_maps[i].data, scene.normal_maps[i].data);
        EXPECT_EQ(back.cameras[i].rotation, scene.cameras[i].rotation);
        EXPECT_EQ(back.cameras[i].translation, scene.cameras[i].translation);
        EXPECT_EQ(back.cameras[i].fx, scene.cameras[i].fx);
    }
    EXPECT_EQ(back.held_out, scene.held_out);
    ASSERT_EQ(back.geometry.primitives.size(), 1u);
    EXPECT_TRUE(back.geometry.primitives[0].textured);
}

TEST(SceneIo, MissingNormalMapsAreOptional) {
    const fs::path dir = scratch_dir("nonormals");
    save_scene(generate_synthetic_scene(small_options()), dir);
    std::ifstream in(dir / "cameras.json");
    nlohmann::json manifest = nlohmann::json::parse(in);
    in.close();
    for (auto& cam : manifest["cameras"]) cam.erase("normals");
    std::ofstream(dir / "cameras.json") << manifest.dump();
    const SceneDataset back = load_scene(dir);
    EXPECT_FALSE(back.has_normals());
    EXPECT_TRUE(back.has_depth());
}

TEST(SceneIo, CorruptImageDimensionsNameTheCamera) {
    const fs::path dir = scratch_dir("corrupt");
    save_scene(generate_synthetic_scene(small_options()), dir);
    write_png(Image(10, 10, 3), dir / "images" / "002.png");
    try {
        load_scene(dir);
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("camera 2"), std::string::npos) << e.what();
    }
}

TEST(SceneIo, MissingManifestIsAnIoError) {
    EXPECT_THROW(load_scene(scratch_dir("empty")), IoError);
}

GaussianSet random_float_set(std::mt19937_64& rng, int n) {
    GaussianSet set = testing::random_scene(rng, n);
    for (auto& g : set.items) {
        for (int k = 0; k < 3; ++k) g.mean[k] = static_cast<float>(g.mean[k]);
        for (int k = 0; k < 3; ++k) g.log_scale[k] = static_cast<float>(g.log_scale[k]);
        for (int k = 0; k < 4; ++k) g.rotation[k] = static_cast<float>(g.rotation[k]);
        g.opacity_logit = static_cast<float>(g.opacity_logit);
        for (int k = 0; k < kShBasisCount; ++k)
            for (int c = 0; c < 3; ++c) g.sh(k, c) = static_cast<float>(g.sh(k, c));
    }
    return set;
}

TEST(GaussianPly, RoundTripIsExactAtFloatPrecision) {
    const fs::path dir = scratch_dir("ply");
    std::mt19937_64 rng(5);
    const GaussianSet set = random_float_set(rng, 100);
    save_gaussians(set, dir / "g.ply");
    const GaussianSet back = load_gaussians(dir / "g.ply");
    ASSERT_EQ(back.size(), set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        EXPECT_EQ(back.items[i].mean, set.items[i].mean);
        EXPECT_EQ(back.items[i].rotation, set.items[i].rotation);
        EXPECT_EQ(back.items[i].log_scale, set.items[i].log_scale);
        EXPECT_EQ(back.items[i].opacity_logit, set.items[i].opacity_logit);
        EXPECT_EQ(back.items[i].sh, set.items[i].sh);
    }
}

TEST(GaussianPly, MissingRotationPropertyIsAFormatError) {
    const fs::path path = scratch_dir("ply_bad") / "bad.ply";
    {
        std::ofstream out(path, std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n";
        for (const char* n : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
                              "rot_0", "rot_1", "rot_2"})
            out << "property float " << n << "\n";
        out << "end_header\n";
        const std::vector<float> rec(13, 0.5f);
        out.write(reinterpret_cast<const char*>(rec.data()), 13 * sizeof(float));
    }
    try {
        load_gaussians(path);
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("rot_3"), std::string::npos);
    }
}

TEST(GaussianPly, AsciiAndTruncatedFilesAreRejected) {
    const fs::path dir = scratch_dir("ply_ascii");
    std::ofstream(dir / "a.ply") << "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
    EXPECT_THROW(load_gaussians(dir / "a.ply"), FormatError);
    std::mt19937_64 rng(6);
    save_gaussians(random_float_set(rng, 3), dir / "t.ply");
    fs::resize_file(dir / "t.ply", fs::file_size(dir / "t.ply") - 10);
    EXPECT_THROW(load_gaussians(dir / "t.ply"), FormatError);
}

TEST(GaussianPly, InteropFixtureLoadsAndRenders) {
    const fs::path fixtures = SDFSPLAT_FIXTURE_DIR;
    const GaussianSet set = load_gaussians(fixtures / "interop_deg1.ply");
    ASSERT_EQ(set.size(), 64u);
    std::ifstream expected(fixtures / "interop_deg1_expected.txt");
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> row(26);
        for (double& v : row) expected >> v;
        const Gaussian& g = set.items[i];
        EXPECT_NEAR(g.mean.x(), row[0], 1e-6);
        EXPECT_NEAR(g.sh(0, 2), row[8], 1e-6);
        EXPECT_NEAR(g.sh(1, 0), row[9], 1e-6);   // f_rest_0: red, first degree-1 basis
        EXPECT_NEAR(g.sh(1, 1), row[12], 1e-6);  // f_rest_3: green
        EXPECT_NEAR(g.sh(3, 2), row[17], 1e-6);  // f_rest_8: blue, last degree-1 basis
        EXPECT_TRUE(g.sh.bottomRows(12).isZero(0.0));
        EXPECT_NEAR(g.opacity_logit, row[18], 1e-6);
        EXPECT_NEAR(g.rotation.norm(), 1.0, 1e-12);
        EXPECT_NEAR(g.rotation[0] / g.rotation[1], row[22] / row[23], 1e-5);
    }
    const FrameBuffer fb = render(set, testing::test_camera(64, 64, 80.0), RenderConfig{});
    double coverage = 0.0;
    for (double a : fb.alpha.data) coverage += a;
    EXPECT_GT(coverage, 1.0);
    for (double v : fb.color.data) EXPECT_TRUE(std::isfinite(v));
}

}  // namespace
}  // namespace sdfsplat
