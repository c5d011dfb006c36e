#include "sdfsplat/scene.hpp"

#include "sdfsplat/error.hpp"
#include "sdfsplat/image_io.hpp"
#include "sdfsplat/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace sdfsplat {

using nlohmann::json;

SceneKind parse_scene_kind(const std::string& name) {
    if (name == "sphere") return SceneKind::Sphere;
    if (name == "box") return SceneKind::Box;
    if (name == "two-spheres") return SceneKind::TwoSpheres;
    if (name == "textured-sphere") return SceneKind::TexturedSphere;
    throw InvalidParameter("unknown scene kind '" + name + "' (expected sphere, box, two-spheres, textured-sphere)");
}

const char* scene_kind_name(SceneKind kind) {
    switch (kind) {
        case SceneKind::Sphere: return "sphere";
        case SceneKind::Box: return "box";
        case SceneKind::TwoSpheres: return "two-spheres";
        case SceneKind::TexturedSphere: return "textured-sphere";
    }
    return "unknown";
}

namespace {

std::optional<RayHit> intersect_primitive(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
    const Vec3 o = prim.orientation.transpose() * (origin - prim.center);
    const Vec3 d = prim.orientation.transpose() * dir;
    RayHit hit;
    if (prim.shape == Primitive::Shape::Sphere) {
        const double r = prim.radius();
        const double b = o.dot(d), c = o.squaredNorm() - r * r, a = d.squaredNorm();
        const double disc = b * b - a * c;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        double t = (-b - sq) / a;
        if (t <= 0.0) t = (-b + sq) / a;
        if (t <= 0.0) return std::nullopt;
        hit.t = t;
        hit.normal = prim.orientation * ((o + t * d) / r);
    } else {
        double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
        int axis = -1;
        for (int k = 0; k < 3; ++k) {
            const double h = prim.half_extent[k];
            if (std::abs(d[k]) < 1e-300) {
                if (std::abs(o[k]) > h) return std::nullopt;
                continue;
            }
            double ta = (-h - o[k]) / d[k], tb = (h - o[k]) / d[k];
            if (ta > tb) std::swap(ta, tb);
            if (ta > t0) {
                t0 = ta;
                axis = k;
            }
            t1 = std::min(t1, tb);
        }
        if (t0 > t1 || t0 <= 0.0 || axis < 0) return std::nullopt;
        hit.t = t0;
        Vec3 n = Vec3::Zero();
        n[axis] = d[axis] > 0.0 ? -1.0 : 1.0;
        hit.normal = prim.orientation * n;
    }
    hit.point = origin + hit.t * dir;
    return hit;
}

double primitive_sdf(const Primitive& prim, const Vec3& p) {
    const Vec3 q = prim.orientation.transpose() * (p - prim.center);
    if (prim.shape == Primitive::Shape::Sphere) return q.norm() - prim.radius();
    const Vec3 e = q.cwiseAbs() - prim.half_extent;
    return e.cwiseMax(0.0).norm() + std::min(e.maxCoeff(), 0.0);
}

double primitive_area(const Primitive& prim) {
    if (prim.shape == Primitive::Shape::Sphere) return 4.0 * std::numbers::pi * prim.radius() * prim.radius();
    const Vec3& h = prim.half_extent;
    return 8.0 * (h.x() * h.y() + h.y() * h.z() + h.x() * h.z());
}

Vec3 sample_primitive(const Primitive& prim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    if (prim.shape == Primitive::Shape::Sphere) {
        std::normal_distribution<double> n(0.0, 1.0);
        Vec3 v;
        do v = Vec3(n(rng), n(rng), n(rng));
        while (v.norm() < 1e-12);
        return prim.center + prim.radius() * v.normalized();
    }
    const Vec3& h = prim.half_extent;
    const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
    std::discrete_distribution<int> face({areas[0], areas[0], areas[1], areas[1], areas[2], areas[2]});
    const int f = face(rng);
    const int axis = f / 2;
    Vec3 q(u(rng) * h.x(), u(rng) * h.y(), u(rng) * h.z());
    q[axis] = (f % 2 == 0 ? -1.0 : 1.0) * h[axis];
    return prim.center + prim.orientation * q;
}

}  // namespace

std::optional<RayHit> SceneGeometry::intersect(const Vec3& origin, const Vec3& dir) const {
    std::optional<RayHit> best;
    for (std::size_t i = 0; i < primitives.size(); ++i) {
        auto hit = intersect_primitive(primitives[i], origin, dir);
        if (hit && (!best || hit->t < best->t)) {
            hit->primitive = static_cast<int>(i);
            best = hit;
        }
    }
    return best;
}

Vec3 SceneGeometry::albedo(int index, const Vec3& point) const {
    const Primitive& prim = primitives.at(static_cast<std::size_t>(index));
    if (!prim.textured) return prim.albedo;
    const Vec3 q = prim.orientation.transpose() * (point - prim.center) / prim.radius();
    return Vec3(0.55 + 0.3 * std::sin(3.0 * q.x()), 0.5 + 0.3 * std::sin(3.0 * q.y() + 1.0),
                0.5 + 0.3 * std::cos(3.0 * q.z()));
}

Vec3 SceneGeometry::radiance(int index, const Vec3& point, const Vec3& normal) const {
    const double diffuse = std::max(0.0, normal.dot(light_dir));
    return albedo(index, point) * (ambient + (1.0 - ambient) * diffuse);
}

double SceneGeometry::signed_distance(const Vec3& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& prim : primitives) d = std::min(d, primitive_sdf(prim, p));
    return d;
}

std::vector<Vec3> SceneGeometry::sample_surface(std::size_t n, std::mt19937_64& rng) const {
    if (primitives.empty()) throw ContractViolation("sample_surface: no primitives");
    std::vector<double> areas;
    for (const auto& prim : primitives) areas.push_back(primitive_area(prim));
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::vector<Vec3> out;
    out.reserve(n);
    while (out.size() < n) {
        const std::size_t i = pick(rng);
        const Vec3 p = sample_primitive(primitives[i], rng);
        bool buried = false;
        for (std::size_t j = 0; j < primitives.size(); ++j)
            if (j != i && primitive_sdf(primitives[j], p) < 0.0) buried = true;
        if (!buried) out.push_back(p);
    }
    return out;
}

Aabb SceneGeometry::bounds() const {
    Aabb box;
    for (const auto& prim : primitives) {
        for (int corner = 0; corner < 8; ++corner) {
            const Vec3 h = prim.shape == Primitive::Shape::Sphere ? Vec3::Constant(prim.radius()) : prim.half_extent;
            const Vec3 s((corner & 1) ? 1.0 : -1.0, (corner & 2) ? 1.0 : -1.0, (corner & 4) ? 1.0 : -1.0);
            const Mat3 rot = prim.shape == Primitive::Shape::Sphere ? Mat3::Identity() : prim.orientation;
            box.expand(prim.center + rot * s.cwiseProduct(h));
        }
    }
    return box;
}

void SceneDataset::validate() const {
    const std::size_t n = cameras.size();
    if (images.size() != n) throw FormatError("image count does not match camera count");
    if (has_normals() && normal_maps.size() != n) throw FormatError("normal map count does not match camera count");
    if (has_depth() && depth_maps.size() != n) throw FormatError("depth map count does not match camera count");
    for (std::size_t i = 0; i < n; ++i) {
        const Camera& cam = cameras[i];
        const std::string who = "camera " + std::to_string(i);
        try {
            cam.validate();
        } catch (const Error& e) {
            throw FormatError(who + ": " + e.what());
        }
        auto check = [&](const Image& img, int channels, const char* what) {
            if (img.width != cam.width || img.height != cam.height || img.channels != channels)
                throw FormatError(who + ": " + what + " is " + std::to_string(img.width) + "x" +
                                  std::to_string(img.height) + "x" + std::to_string(img.channels) + ", expected " +
                                  std::to_string(cam.width) + "x" + std::to_string(cam.height) + "x" +
                                  std::to_string(channels));
        };
        check(images[i], 3, "image");
        if (has_normals()) {
            check(normal_maps[i], 3, "normal map");
            for (std::size_t p = 0; p < normal_maps[i].pixel_count(); ++p) {
                const double* v = &normal_maps[i].data[3 * p];
                const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                if (norm != 0.0 && std::abs(norm - 1.0) > 1e-3)
                    throw FormatError(who + ": normal map holds a non-unit vector");
            }
        }
        if (has_depth()) check(depth_maps[i], 1, "depth map");
    }
    for (int idx : train)
        if (idx < 0 || static_cast<std::size_t>(idx) >= n) throw FormatError("train index out of range");
    for (int idx : held_out)
        if (idx < 0 || static_cast<std::size_t>(idx) >= n) throw FormatError("held-out index out of range");
}

void assign_split(SceneDataset& scene) {
    scene.train.clear();
    scene.held_out.clear();
    for (int i = 0; i < static_cast<int>(scene.cameras.size()); ++i) (i % 8 == 0 ? scene.held_out : scene.train).push_back(i);
}

namespace {

SceneGeometry make_geometry(SceneKind kind) {
    SceneGeometry g;
    Primitive p;
    switch (kind) {
        case SceneKind::Sphere:
            p.half_extent = Vec3::Constant(1.0);
            p.albedo = Vec3(0.85, 0.55, 0.35);
            g.primitives.push_back(p);
            break;
        case SceneKind::TexturedSphere:
            p.half_extent = Vec3::Constant(1.0);
            p.textured = true;
            g.primitives.push_back(p);
            break;
        case SceneKind::Box:
            p.shape = Primitive::Shape::Box;
            p.half_extent = Vec3(0.8, 0.65, 0.5);
            p.orientation = Eigen::AngleAxisd(0.4, Vec3::UnitZ()).toRotationMatrix();
            p.albedo = Vec3(0.4, 0.7, 0.5);
            g.primitives.push_back(p);
            break;
        case SceneKind::TwoSpheres:
            p.center = Vec3(-0.65, 0.0, 0.0);
            p.half_extent = Vec3::Constant(0.6);
            p.albedo = Vec3(0.85, 0.45, 0.3);
            g.primitives.push_back(p);
            p.center = Vec3(0.7, 0.1, 0.05);
            p.half_extent = Vec3::Constant(0.5);
            p.albedo = Vec3(0.3, 0.55, 0.85);
            g.primitives.push_back(p);
            break;
    }
    return g;
}

double default_distance(SceneKind kind) { return kind == SceneKind::TwoSpheres || kind == SceneKind::Box ? 4.0 : 3.5; }

void render_view(const SceneGeometry& geo, const Camera& cam, int supersample, Image& color, Image& depth,
                 Image& normals) {
    color = Image(cam.width, cam.height, 3);
    depth = Image(cam.width, cam.height, 1);
    normals = Image(cam.width, cam.height, 3);
    const Vec3 origin = cam.center();
    const Mat3 view_to_world = cam.rotation.transpose();
    auto ray = [&](double u, double v) {
        return (view_to_world * Vec3((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0)).normalized();
    };
    parallel_for(static_cast<std::size_t>(cam.height), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < cam.width; ++x) {
            Vec3 sum = Vec3::Zero();
            for (int sy = 0; sy < supersample; ++sy)
                for (int sx = 0; sx < supersample; ++sx) {
                    const double u = x + (sx + 0.5) / supersample, v = y + (sy + 0.5) / supersample;
                    if (auto hit = geo.intersect(origin, ray(u, v)))
                        sum += geo.radiance(hit->primitive, hit->point, hit->normal);
                }
            sum /= static_cast<double>(supersample * supersample);
            for (int c = 0; c < 3; ++c) color(x, y, c) = sum[c];
            if (auto hit = geo.intersect(origin, ray(x + 0.5, y + 0.5))) {
                depth(x, y) = cam.to_view(hit->point).z();
                const Vec3 n = (cam.rotation * hit->normal).normalized();
                for (int c = 0; c < 3; ++c) normals(x, y, c) = n[c];
            }
        }
    });
    quantize_to_8bit(color);
    quantize_to_float(depth);
    quantize_to_float(normals);
}

}  // namespace

SceneDataset generate_synthetic_scene(const SceneOptions& opt) {
    if (opt.n_cameras < 2) throw InvalidParameter("a scene needs at least 2 cameras");
    if (opt.resolution < 8) throw InvalidParameter("resolution must be at least 8");
    if (opt.supersample < 1) throw InvalidParameter("supersample must be at least 1");
    if (!(opt.fov_degrees > 1.0 && opt.fov_degrees < 170.0)) throw InvalidParameter("fov must lie in (1, 170) degrees");
    const Mat3& G = opt.world_rotation;
    if (!(G * G.transpose()).isApprox(Mat3::Identity(), 1e-9) || G.determinant() < 0.0)
        throw InvalidParameter("world_rotation must be a proper rotation");

    SceneDataset scene;
    scene.geometry = make_geometry(opt.kind);
    for (auto& prim : scene.geometry.primitives) {
        prim.center = G * prim.center;
        prim.orientation = G * prim.orientation;
    }
    scene.geometry.light_dir = G * scene.geometry.light_dir;

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double distance = opt.camera_distance > 0.0 ? opt.camera_distance : default_distance(opt.kind);
    const double focal = 0.5 * opt.resolution / std::tan(0.5 * opt.fov_degrees * std::numbers::pi / 180.0);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double phase = 2.0 * std::numbers::pi * u(rng);
    for (int i = 0; i < opt.n_cameras; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / opt.n_cameras;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = phase + golden * i;
        const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
        const double dist = distance * (1.0 + 0.1 * (u(rng) - 0.5));
        Camera cam = Camera::look_at(dist * dir, Vec3::Zero(), Vec3::UnitZ(), focal, focal, opt.resolution,
                                     opt.resolution);
        cam.near = 0.1;
        cam.far = 100.0;
        cam.rotation = cam.rotation * G.transpose();
        scene.cameras.push_back(cam);
    }

    scene.images.resize(scene.cameras.size());
    scene.depth_maps.resize(scene.cameras.size());
    scene.normal_maps.resize(scene.cameras.size());
    for (std::size_t i = 0; i < scene.cameras.size(); ++i)
        render_view(scene.geometry, scene.cameras[i], opt.supersample, scene.images[i], scene.depth_maps[i],
                    scene.normal_maps[i]);
    assign_split(scene);
    return scene;
}

namespace {

std::string numbered(int i, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%03d.%s", i, ext);
    return buf;
}

json mat_to_json(const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return rows;
}

Mat3 mat_from_json(const json& j) {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = j.at(r).at(c).get<double>();
    return m;
}

Vec3 vec_from_json(const json& j) { return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }

}  // namespace

void save_scene(const SceneDataset& scene, const std::filesystem::path& dir) {
    scene.validate();
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    if (scene.has_depth()) fs::create_directories(dir / "depth");
    if (scene.has_normals()) fs::create_directories(dir / "normals");

    json cams = json::array();
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Camera& cam = scene.cameras[i];
        const int idx = static_cast<int>(i);
        json world_to_view = json::array();
        for (int r = 0; r < 3; ++r)
            world_to_view.push_back({cam.rotation(r, 0), cam.rotation(r, 1), cam.rotation(r, 2), cam.translation[r]});
        world_to_view.push_back({0.0, 0.0, 0.0, 1.0});
        json entry = {{"width", cam.width},  {"height", cam.height}, {"fx", cam.fx},     {"fy", cam.fy},
                      {"cx", cam.cx},        {"cy", cam.cy},         {"near", cam.near}, {"far", cam.far},
                      {"world_to_view", world_to_view},              {"image", "images/" + numbered(idx, "png")}};
        write_png(scene.images[i], dir / "images" / numbered(idx, "png"));
        if (scene.has_depth()) {
            entry["depth"] = "depth/" + numbered(idx, "pfm");
            write_pfm(scene.depth_maps[i], dir / "depth" / numbered(idx, "pfm"));
        }
        if (scene.has_normals()) {
            entry["normals"] = "normals/" + numbered(idx, "pfm");
            write_pfm(scene.normal_maps[i], dir / "normals" / numbered(idx, "pfm"));
        }
        cams.push_back(entry);
    }
    json manifest = {{"cameras", cams}, {"train", scene.train}, {"held_out", scene.held_out}};
    if (!scene.geometry.empty()) {
        json prims = json::array();
        for (const auto& p : scene.geometry.primitives) {
            prims.push_back({{"shape", p.shape == Primitive::Shape::Sphere ? "sphere" : "box"},
                             {"center", {p.center.x(), p.center.y(), p.center.z()}},
                             {"half_extent", {p.half_extent.x(), p.half_extent.y(), p.half_extent.z()}},
                             {"orientation", mat_to_json(p.orientation)},
                             {"albedo", {p.albedo.x(), p.albedo.y(), p.albedo.z()}},
                             {"textured", p.textured}});
        }
        const Vec3& l = scene.geometry.light_dir;
        manifest["geometry"] = {{"primitives", prims},
                                {"light_dir", {l.x(), l.y(), l.z()}},
                                {"ambient", scene.geometry.ambient}};
    }
    std::ofstream out(dir / "cameras.json");
    if (!out) throw IoError("cannot write " + (dir / "cameras.json").string());
    out << manifest.dump(2) << "\n";
}

SceneDataset load_scene(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "cameras.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError("missing camera manifest " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError("malformed camera manifest: " + std::string(e.what()));
    }

    SceneDataset scene;
    try {
        const json& cams = manifest.at("cameras");
        bool normals = !cams.empty(), depth = !cams.empty();
        for (const auto& c : cams) {
            normals = normals && c.contains("normals");
            depth = depth && c.contains("depth");
        }
        for (std::size_t i = 0; i < cams.size(); ++i) {
            const json& c = cams[i];
            Camera cam;
            cam.width = c.at("width").get<int>();
            cam.height = c.at("height").get<int>();
            cam.fx = c.at("fx").get<double>();
            cam.fy = c.at("fy").get<double>();
            cam.cx = c.at("cx").get<double>();
            cam.cy = c.at("cy").get<double>();
            cam.near = c.value("near", cam.near);
            cam.far = c.value("far", cam.far);
            const json& m = c.at("world_to_view");
            for (int r = 0; r < 3; ++r) {
                for (int k = 0; k < 3; ++k) cam.rotation(r, k) = m.at(r).at(k).get<double>();
                cam.translation[r] = m.at(r).at(3).get<double>();
            }
            scene.cameras.push_back(cam);
            scene.images.push_back(read_png(dir / c.at("image").get<std::string>()));
            if (depth) scene.depth_maps.push_back(read_pfm(dir / c.at("depth").get<std::string>()));
            if (normals) {
                Image n = read_pfm(dir / c.at("normals").get<std::string>());
                bool renormalized = false;
                for (std::size_t p = 0; p < n.pixel_count(); ++p) {
                    Eigen::Map<Vec3> v(&n.data[3 * p]);
                    const double norm = v.norm();
                    // Float32 storage leaves unit vectors off by ~1e-7; leave those untouched.
                    if (norm != 0.0 && std::abs(norm - 1.0) > 1e-6) {
                        v /= norm;
                        renormalized = true;
                    }
                }
                if (renormalized)
                    std::fprintf(stderr, "warning: camera %zu: non-unit normals renormalized\n", i);
                scene.normal_maps.push_back(std::move(n));
            }
        }
        if (manifest.contains("train") && manifest.contains("held_out")) {
            scene.train = manifest["train"].get<std::vector<int>>();
            scene.held_out = manifest["held_out"].get<std::vector<int>>();
        } else {
            assign_split(scene);
        }
        if (manifest.contains("geometry")) {
            const json& g = manifest["geometry"];
            for (const auto& p : g.at("primitives")) {
                Primitive prim;
                prim.shape = p.at("shape").get<std::string>() == "box" ? Primitive::Shape::Box : Primitive::Shape::Sphere;
                prim.center = vec_from_json(p.at("center"));
                prim.half_extent = vec_from_json(p.at("half_extent"));
                prim.orientation = mat_from_json(p.at("orientation"));
                prim.albedo = vec_from_json(p.at("albedo"));
                prim.textured = p.value("textured", false);
                scene.geometry.primitives.push_back(prim);
            }
            scene.geometry.light_dir = vec_from_json(g.at("light_dir"));
            scene.geometry.ambient = g.at("ambient").get<double>();
        }
    } catch (const json::exception& e) {
        throw FormatError("malformed camera manifest: " + std::string(e.what()));
    }
    scene.validate();
    return scene;
}

}  // namespace sdfsplat
