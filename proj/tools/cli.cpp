#include "cli.hpp"

#include "sdfsplat/error.hpp"
#include "sdfsplat/image_io.hpp"
#include "sdfsplat/mesh.hpp"
#include "sdfsplat/metrics.hpp"
#include "sdfsplat/parallel.hpp"
#include "sdfsplat/ply.hpp"
#include "sdfsplat/scene.hpp"
#include "sdfsplat/sdf.hpp"
#include "sdfsplat/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace sdfsplat::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string git_blob_hash(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash " + path.string());
    const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string header = "blob " + std::to_string(body.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, body.data(), body.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

namespace {

void write_json_atomic(const json& j, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Written with status "running" at start and rewritten with hashes at the end.
/// Output paths are stored relative to the manifest so relocated runs compare equal.
class RunManifest {
public:
    RunManifest(fs::path path, std::string command, json config)
        : path_(std::move(path)), command_(std::move(command)), config_(std::move(config)) {}

    void add_output(const std::string& key, const fs::path& file) { outputs_.emplace_back(key, file); }
    void set(const std::string& key, json value) { extra_[key] = std::move(value); }

    void start() const { write("running", false); }
    void finish() const { write("complete", true); }

private:
    void write(const char* status, bool hashes) const {
        json j;
        j["command"] = command_;
        j["status"] = status;
        j["config"] = config_;
        for (const auto& [k, v] : extra_.items()) j[k] = v;
        json outs = json::object(), sums = json::object();
        const fs::path base = path_.parent_path().empty() ? fs::path(".") : path_.parent_path();
        for (const auto& [key, file] : outputs_) {
            const std::string rel = fs::relative(file, base).generic_string();
            outs[key] = rel;
            if (hashes && fs::is_regular_file(file)) sums[rel] = git_blob_hash(file);
        }
        j["outputs"] = outs;
        if (hashes) j["hashes"] = sums;
        write_json_atomic(j, path_);
    }

    fs::path path_;
    std::string command_;
    json config_;
    json extra_ = json::object();
    std::vector<std::pair<std::string, fs::path>> outputs_;
};

fs::path sidecar_manifest(const fs::path& out_file) { return fs::path(out_file.string() + ".manifest.json"); }

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// ---- make-scene ----

struct MakeSceneArgs {
    std::string kind;
    int cameras = 24;
    int res = 128;
    std::uint64_t seed = 0;
    int supersample = 3;
    std::string out;
};

int cmd_make_scene(const MakeSceneArgs& a) {
    SceneOptions opt;
    opt.kind = parse_scene_kind(a.kind);
    opt.n_cameras = a.cameras;
    opt.resolution = a.res;
    opt.seed = a.seed;
    opt.supersample = a.supersample;
    const fs::path dir(a.out);
    fs::create_directories(dir);
    RunManifest manifest(dir / "manifest.json", "make-scene",
                         {{"kind", a.kind}, {"cameras", a.cameras}, {"res", a.res}, {"seed", a.seed},
                          {"supersample", a.supersample}});
    manifest.start();
    const SceneDataset scene = generate_synthetic_scene(opt);
    save_scene(scene, dir);
    manifest.add_output("cameras", dir / "cameras.json");
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() != ".json")
            manifest.add_output(fs::relative(entry.path(), dir).generic_string(), entry.path());
    manifest.finish();
    std::cout << scene.size() << " cameras: " << scene.train.size() << " train, " << scene.held_out.size()
              << " held-out\n";
    return kExitOk;
}

// ---- train ----

struct TrainArgs {
    std::string scene;
    std::string out;
    double lambda_r = 0.2;
    double lambda_dssim = 0.2;
    double lambda_entropy = 0.3;
    int reg_iters = 6000;
    std::vector<int> stages;
    std::uint64_t seed = 0;
    bool deterministic = false;
    std::string init = "random";
    std::size_t init_points = 4000;
    std::size_t max_gaussians = 200000;
    int densify_from = 500;
    int sh_interval = 1000;
    int eval_interval = 1000;
    bool quiet = false;
};

json train_config_json(const TrainConfig& c, const std::string& init) {
    const auto b = c.schedule.boundaries();
    return {{"stages", {c.schedule.vanilla, c.schedule.opacity, c.schedule.regularized, c.schedule.refinement}},
            {"stage_boundaries", {b[0], b[1], b[2], b[3]}},
            {"lambda_r", c.weights.lambda_r},
            {"lambda_dssim", c.weights.lambda_dssim},
            {"lambda_entropy", c.weights.lambda_entropy},
            {"seed", c.seed},
            {"deterministic", c.deterministic},
            {"init", init},
            {"init_points", c.init_points},
            {"max_gaussians", c.densify.max_gaussians},
            {"densify_from", c.densify_from},
            {"densify_interval", c.densify.interval},
            {"densify_grad_threshold", c.densify.grad_threshold},
            {"prune_opacity", c.densify.prune_opacity},
            {"sh_degree_interval", c.sh_degree_interval},
            {"eval_interval", c.eval_interval}};
}

int cmd_train(const TrainArgs& a) {
    TrainConfig cfg;
    if (!a.stages.empty()) {
        if (a.stages.size() != 4) throw InvalidParameter("--stages needs four lengths");
        cfg.schedule = {a.stages[0], a.stages[1], a.stages[2], a.stages[3]};
    } else {
        cfg.schedule = StageSchedule::published(a.reg_iters);
    }
    cfg.weights.lambda_r = a.lambda_r;
    cfg.weights.lambda_dssim = a.lambda_dssim;
    cfg.weights.lambda_entropy = a.lambda_entropy;
    cfg.seed = a.seed;
    cfg.deterministic = a.deterministic;
    cfg.init_from_depth = a.init == "depth";
    cfg.init_points = a.init_points;
    cfg.densify.max_gaussians = a.max_gaussians;
    cfg.densify_from = a.densify_from;
    cfg.sh_degree_interval = a.sh_interval;
    cfg.eval_interval = a.eval_interval;
    cfg.validate();

    const SceneDataset scene = load_scene(a.scene);
    if (cfg.needs_normals() && !scene.has_normals())
        throw ConfigError("scene " + a.scene + " has no normal maps; pass --lambda-r 0 or add normals");

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const fs::path ply = dir / "gaussians.ply", log = dir / "train_log.jsonl", metrics = dir / "metrics.json";
    RunManifest manifest(dir / "manifest.json", "train", train_config_json(cfg, a.init));
    manifest.set("seed", cfg.seed);
    const auto b = cfg.schedule.boundaries();
    manifest.set("stage_boundaries", {b[0], b[1], b[2], b[3]});
    manifest.add_output("gaussians", ply);
    manifest.add_output("log", log);
    manifest.add_output("metrics", metrics);
    manifest.start();

    std::ofstream log_out(log);
    if (!log_out) throw IoError("cannot write " + log.string());
    if (!a.quiet)
        std::cout << "stages " << cfg.schedule.vanilla << "/" << cfg.schedule.opacity << "/" << cfg.schedule.regularized
                  << "/" << cfg.schedule.refinement << " (boundaries " << b[0] << ", " << b[1] << ", " << b[2] << ", "
                  << b[3] << ")\n";
    const TrainResult result = train(scene, cfg, [&](const IterationRecord& rec) {
        log_out << to_json_line(rec) << '\n';
        if (!a.quiet && rec.heldout_psnr)
            std::cout << "iter " << rec.iteration + 1 << " [" << stage_name(rec.stage) << "] loss " << rec.loss.total
                      << " gaussians " << rec.gaussians << " held-out PSNR " << *rec.heldout_psnr << "\n";
    });
    log_out.close();
    save_gaussians(result.gaussians, ply);

    RenderConfig rc;
    json views = json::array();
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (int c : scene.held_out) {
        const auto i = static_cast<std::size_t>(c);
        FrameBuffer fb = render(result.gaussians, scene.cameras[i], rc);
        for (double& v : fb.color.data) v = std::clamp(v, 0.0, 1.0);
        const double p = std::min(psnr(fb.color, scene.images[i]), kPsnrCap), s = ssim(fb.color, scene.images[i]);
        psnr_sum += p;
        ssim_sum += s;
        views.push_back({{"camera", c}, {"psnr", p}, {"ssim", s}});
    }
    json snaps = json::array();
    for (const auto& s : result.snapshots)
        snaps.push_back({{"after", s.label},
                         {"iteration", s.iteration},
                         {"gaussians", s.gaussians},
                         {"semi_transparent_fraction", s.semi_transparent_fraction}});
    const double n = std::max<double>(1.0, static_cast<double>(scene.held_out.size()));
    write_json_atomic({{"heldout_psnr", psnr_sum / n},
                       {"heldout_ssim", ssim_sum / n},
                       {"views", views},
                       {"snapshots", snaps},
                       {"gaussians", result.gaussians.size()},
                       {"skipped_rows", result.skipped_rows}},
                      metrics);
    manifest.finish();
    if (!a.quiet)
        std::cout << "wrote " << ply.string() << " (" << result.gaussians.size() << " Gaussians), held-out PSNR "
                  << psnr_sum / n << " dB\n";
    return kExitOk;
}

// ---- render ----

struct RenderArgs {
    std::string ply;
    std::string scene;
    std::string cameras = "held-out";
    std::vector<std::string> channels;
    std::string out;
    int sh_degree = kMaxShDegree;
};

std::vector<int> parse_cameras(const std::string& which, const SceneDataset& scene) {
    if (which == "held-out") return scene.held_out;
    if (which == "train") return scene.train;
    std::vector<int> out;
    if (which == "all") {
        for (std::size_t i = 0; i < scene.size(); ++i) out.push_back(static_cast<int>(i));
        return out;
    }
    std::stringstream ss(which);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        int idx = -1;
        try {
            idx = std::stoi(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || tok.empty()) throw InvalidParameter("bad camera index '" + tok + "'");
        if (idx < 0 || static_cast<std::size_t>(idx) >= scene.size())
            throw InvalidParameter("camera index " + tok + " out of range (scene has " + std::to_string(scene.size()) +
                                   " cameras)");
        out.push_back(idx);
    }
    return out;
}

int cmd_render(const RenderArgs& a) {
    if (a.channels.empty()) throw InvalidParameter("--channels needs at least one channel");
    const SceneDataset scene = load_scene(a.scene);
    const GaussianSet gaussians = load_gaussians(a.ply);
    const std::vector<int> cams = parse_cameras(a.cameras, scene);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    RunManifest manifest(dir / "manifest.json", "render",
                         {{"cameras", cams}, {"channels", a.channels}, {"sh_degree", a.sh_degree}});
    manifest.start();
    RenderConfig rc;
    rc.sh_degree = a.sh_degree;
    rc.validate();
    for (int c : cams) {
        const auto i = static_cast<std::size_t>(c);
        FrameBuffer fb = render(gaussians, scene.cameras[i], rc);
        char stem[32];
        std::snprintf(stem, sizeof stem, "%03d", c);
        for (const std::string& ch : a.channels) {
            fs::path file;
            if (ch == "color") {
                Image img = fb.color;
                for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
                file = dir / (std::string(stem) + "_color.png");
                write_png(img, file);
                std::cout << "camera " << c << ": PSNR " << std::min(psnr(img, scene.images[i]), kPsnrCap) << " dB\n";
            } else if (ch == "depth") {
                file = dir / (std::string(stem) + "_depth.pfm");
                write_pfm(fb.depth, file);
            } else if (ch == "alpha") {
                file = dir / (std::string(stem) + "_alpha.pfm");
                write_pfm(fb.alpha, file);
            } else if (ch == "grad_map") {
                file = dir / (std::string(stem) + "_grad_map.pfm");
                write_pfm(fb.grad_map, file);
            } else if (ch == "normals") {
                Image vis(fb.grad_map.width, fb.grad_map.height, 3);
                for (int y = 0; y < vis.height; ++y)
                    for (int x = 0; x < vis.width; ++x) {
                        Vec3 n(fb.grad_map(x, y, 0), fb.grad_map(x, y, 1), fb.grad_map(x, y, 2));
                        if (n.norm() > 0.0) n.normalize();
                        for (int k = 0; k < 3; ++k) vis(x, y, k) = n.norm() > 0.0 ? 0.5 * (n[k] + 1.0) : 0.0;
                    }
                file = dir / (std::string(stem) + "_normals.png");
                write_png(vis, file);
            } else {
                throw InvalidParameter("unknown channel '" + ch + "'");
            }
            manifest.add_output(file.filename().string(), file);
        }
    }
    manifest.finish();
    return kExitOk;
}

// ---- extract-mesh ----

struct MeshArgs {
    std::string ply;
    std::string scene;
    int res = 128;
    std::string out;
    std::string export_points;
    std::size_t points = 100000;
    bool color = true;
    std::uint64_t seed = 0;
};

int cmd_extract_mesh(const MeshArgs& a) {
    if (a.res < 2) throw InvalidParameter("--res must be at least 2");
    const SceneDataset scene = load_scene(a.scene);
    const GaussianSet gaussians = load_gaussians(a.ply);
    if (gaussians.empty()) throw InvalidParameter("Gaussian file has no entries");
    const fs::path out(a.out);
    ensure_parent(out);
    RunManifest manifest(sidecar_manifest(out), "extract-mesh",
                         {{"res", a.res}, {"color", a.color}, {"points", a.points}, {"seed", a.seed}});
    manifest.add_output("mesh", out);
    if (!a.export_points.empty()) manifest.add_output("points", a.export_points);
    manifest.start();

    std::vector<Camera> cams;
    for (int c : scene.train) cams.push_back(scene.cameras[static_cast<std::size_t>(c)]);
    const std::vector<DepthView> views = render_depth_views(gaussians, cams);
    const Aabb bounds = gaussians.scene_bounds().inflated(0.05);
    const SdfGrid grid = build_sdf_grid(views, bounds, {a.res, a.res, a.res});
    TriangleMesh mesh = marching_cubes(grid);
    if (mesh.empty()) std::cerr << "warning: no zero crossing found; writing an empty mesh\n";
    else if (a.color) mesh = color_mesh(mesh, gaussians, cams);

    if (out.extension() == ".obj") write_obj(mesh, out);
    else write_mesh_ply(mesh, out);
    std::cout << "mesh: " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles";
    if (!mesh.empty())
        std::cout << ", watertight " << (mesh.is_watertight() ? "yes" : "no") << ", Euler characteristic "
                  << mesh.euler_characteristic();
    std::cout << "\n";
    manifest.set("mesh_stats", {{"vertices", mesh.vertices.size()},
                                {"triangles", mesh.triangles.size()},
                                {"watertight", mesh.is_watertight()},
                                {"euler_characteristic", mesh.euler_characteristic()}});

    if (!a.export_points.empty()) {
        LevelSetConfig ls;
        ls.seed = a.seed;
        const OrientedPointCloud cloud = sample_level_set(gaussians, views, a.points, ls);
        ensure_parent(a.export_points);
        write_oriented_points(cloud, a.export_points);
        std::cout << "points: " << cloud.size() << " oriented level-set samples\n";
    }
    manifest.finish();
    return kExitOk;
}

// ---- eval ----

struct EvalArgs {
    std::string ply;
    std::string scene;
    std::string mesh;
    std::string reference;
    std::size_t samples = 100000;
    std::string out;
    double lambda_dssim = 0.2;
    double lambda_r = 0.2;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    const SceneDataset scene = load_scene(a.scene);
    const GaussianSet gaussians = load_gaussians(a.ply);
    if (!a.reference.empty() && a.reference != "analytic") throw InvalidParameter("--reference must be 'analytic'");
    if (!a.reference.empty() && a.mesh.empty()) throw InvalidParameter("--reference needs --mesh");
    if (!a.reference.empty() && scene.geometry.primitives.empty())
        throw ConfigError("scene has no analytic geometry for a Chamfer reference");
    if (scene.held_out.empty()) throw ConfigError("scene has no held-out cameras");

    const fs::path out(a.out);
    ensure_parent(out);
    RunManifest manifest(sidecar_manifest(out), "eval",
                         {{"lambda_dssim", a.lambda_dssim}, {"lambda_r", a.lambda_r}, {"samples", a.samples},
                          {"reference", a.reference}, {"seed", a.seed}});
    manifest.add_output("report", out);
    manifest.start();

    LossWeights w;
    w.lambda_dssim = a.lambda_dssim;
    w.lambda_r = a.lambda_r;
    w.validate();
    RenderConfig rc;
    double p_sum = 0.0, s_sum = 0.0, align_sum = 0.0, l1_sum = 0.0, ds_sum = 0.0, nr_sum = 0.0;
    for (int c : scene.held_out) {
        const auto i = static_cast<std::size_t>(c);
        FrameBuffer fb = render(gaussians, scene.cameras[i], rc);
        l1_sum += l1_loss(fb.color, scene.images[i]).value;
        ds_sum += dssim_loss(fb.color, scene.images[i]).value;
        if (scene.has_normals()) {
            align_sum += normal_alignment(fb.grad_map, scene.normal_maps[i], fb.alpha);
            nr_sum += normal_reg(fb.grad_map, scene.normal_maps[i], fb.alpha).value;
        }
        for (double& v : fb.color.data) v = std::clamp(v, 0.0, 1.0);
        p_sum += std::min(psnr(fb.color, scene.images[i]), kPsnrCap);
        s_sum += ssim(fb.color, scene.images[i]);
    }
    const auto n = static_cast<double>(scene.held_out.size());
    json report;
    report["heldout_views"] = scene.held_out.size();
    report["psnr"] = p_sum / n;
    report["ssim"] = s_sum / n;
    if (scene.has_normals()) report["normal_alignment"] = align_sum / n;
    const LossReport loss = total_loss(Stage::Regularized, w, l1_sum / n, ds_sum / n, scene.has_normals() ? nr_sum / n : 0.0,
                                       0.0, 0);
    report["loss"] = {{"l1", loss.l1},
                      {"dssim", loss.dssim},
                      {"normal_reg", loss.normal_reg},
                      {"lambda_dssim", w.lambda_dssim},
                      {"lambda_r", w.lambda_r},
                      {"total", loss.total}};
    if (!a.mesh.empty()) {
        const TriangleMesh mesh = read_mesh_ply(a.mesh);
        report["mesh"] = {{"vertices", mesh.vertices.size()},
                          {"triangles", mesh.triangles.size()},
                          {"watertight", mesh.is_watertight()},
                          {"euler_characteristic", mesh.euler_characteristic()}};
        if (!a.reference.empty()) {
            if (mesh.empty()) throw ConfigError("mesh is empty; Chamfer distance undefined");
            std::mt19937_64 rng(a.seed);
            const auto on_mesh = sample_mesh(mesh, a.samples, rng);
            const auto on_ref = scene.geometry.sample_surface(a.samples, rng);
            report["chamfer"] = chamfer_distance(on_mesh, on_ref);
        }
    }
    write_json_atomic(report, out);
    manifest.finish();
    std::cout << report.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args_in) {
    CLI::App app{"Gaussian splatting with SDF-gradient normal regularization and mesh extraction"};
    app.name("sdfsplat");
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: SDFSPLAT_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);

    MakeSceneArgs ms;
    auto* make = app.add_subcommand("make-scene", "Generate a synthetic dataset with analytic ground truth");
    make->add_option("--kind", ms.kind, "sphere | box | two-spheres | textured-sphere")
        ->required()
        ->check(CLI::IsMember({"sphere", "box", "two-spheres", "textured-sphere"}));
    make->add_option("--cameras", ms.cameras, "Number of cameras")->check(CLI::Range(2, 100000));
    make->add_option("--res", ms.res, "Square image resolution")->check(CLI::Range(8, 16384));
    make->add_option("--seed", ms.seed, "Camera placement seed");
    make->add_option("--supersample", ms.supersample, "Rays per pixel side")->check(CLI::Range(1, 16));
    make->add_option("--out", ms.out, "Output directory")->required();

    TrainArgs tr;
    auto* trn = app.add_subcommand("train", "Optimize Gaussians on a dataset");
    trn->set_config("--config", "", "Optional TOML/INI file with option values (flags override)");
    trn->add_option("--scene", tr.scene, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    trn->add_option("--out", tr.out, "Run directory")->required();
    trn->add_option("--lambda-r", tr.lambda_r, "Normal regularization weight")->check(CLI::NonNegativeNumber);
    trn->add_option("--lambda-dssim", tr.lambda_dssim, "D-SSIM weight")->check(CLI::NonNegativeNumber);
    trn->add_option("--lambda-entropy", tr.lambda_entropy, "Entropy weight")->check(CLI::NonNegativeNumber);
    auto* reg = trn->add_option("--reg-iters", tr.reg_iters, "Regularized stage length: 6000 or 13000")
                    ->check(CLI::IsMember({6000, 13000}));
    trn->add_option("--stages", tr.stages, "Custom stage lengths: vanilla,opacity,regularized,refinement")
        ->delimiter(',')
        ->expected(4)
        ->excludes(reg);
    trn->add_option("--seed", tr.seed, "Seed for initialization, camera order and densification");
    trn->add_flag("--deterministic", tr.deterministic, "Require bit-reproducible execution");
    trn->add_option("--init", tr.init, "Initial points: random (ball) or depth (back-projected depth maps)")
        ->check(CLI::IsMember({"random", "depth"}));
    trn->add_option("--init-points", tr.init_points, "Initial Gaussian count")->check(CLI::PositiveNumber);
    trn->add_option("--max-gaussians", tr.max_gaussians, "Densification cap")->check(CLI::PositiveNumber);
    trn->add_option("--densify-from", tr.densify_from, "First densification iteration")->check(CLI::NonNegativeNumber);
    trn->add_option("--sh-interval", tr.sh_interval, "Iterations per SH degree increment")->check(CLI::PositiveNumber);
    trn->add_option("--eval-interval", tr.eval_interval, "Held-out PSNR cadence (0: end only)")
        ->check(CLI::NonNegativeNumber);
    trn->add_flag("--quiet", tr.quiet, "Only errors on stderr");

    RenderArgs rd;
    auto* rnd = app.add_subcommand("render", "Render channels of a trained model");
    rnd->add_option("--ply", rd.ply, "Gaussian PLY")->required()->check(CLI::ExistingFile);
    rnd->add_option("--scene", rd.scene, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    rnd->add_option("--cameras", rd.cameras, "held-out | train | all | comma-separated indices");
    rnd->add_option("--channels", rd.channels, "color,depth,alpha,grad_map,normals")
        ->delimiter(',')
        ->required()
        ->check(CLI::IsMember({"color", "depth", "alpha", "grad_map", "normals"}));
    rnd->add_option("--out", rd.out, "Output directory")->required();
    rnd->add_option("--sh-degree", rd.sh_degree, "SH degree used for color")->check(CLI::Range(0, kMaxShDegree));

    MeshArgs me;
    auto* msh = app.add_subcommand("extract-mesh", "Extract a mesh from the SDF of a trained model");
    msh->add_option("--ply", me.ply, "Gaussian PLY")->required()->check(CLI::ExistingFile);
    msh->add_option("--scene", me.scene, "Dataset directory (training cameras)")->required()->check(CLI::ExistingDirectory);
    msh->add_option("--res", me.res, "Grid resolution per axis")->check(CLI::Range(2, 2048));
    msh->add_option("--out", me.out, "Mesh path (.ply or .obj)")->required();
    msh->add_option("--export-points", me.export_points, "Also write oriented level-set points (PLY)");
    msh->add_option("--points", me.points, "Number of exported points")->check(CLI::PositiveNumber);
    msh->add_flag("!--no-color", me.color, "Skip vertex coloring");
    msh->add_option("--seed", me.seed, "Level-set sampling seed");

    EvalArgs ev;
    auto* evl = app.add_subcommand("eval", "Held-out metrics and optional mesh Chamfer distance");
    evl->add_option("--ply", ev.ply, "Gaussian PLY")->required()->check(CLI::ExistingFile);
    evl->add_option("--scene", ev.scene, "Dataset directory")->required()->check(CLI::ExistingDirectory);
    evl->add_option("--mesh", ev.mesh, "Mesh PLY written by extract-mesh")->check(CLI::ExistingFile);
    evl->add_option("--reference", ev.reference, "Chamfer reference: analytic")->check(CLI::IsMember({"analytic"}));
    evl->add_option("--samples", ev.samples, "Points sampled per surface for Chamfer")->check(CLI::PositiveNumber);
    evl->add_option("--out", ev.out, "Report path (JSON)")->required();
    evl->add_option("--lambda-dssim", ev.lambda_dssim, "D-SSIM weight in the loss report")->check(CLI::NonNegativeNumber);
    evl->add_option("--lambda-r", ev.lambda_r, "Normal weight in the loss report")->check(CLI::NonNegativeNumber);
    evl->add_option("--seed", ev.seed, "Sampling seed");

    std::vector<std::string> args(args_in.begin() + (args_in.empty() ? 0 : 1), args_in.end());
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (threads > 0) set_thread_count(threads);
        if (*make) return cmd_make_scene(ms);
        if (*trn) return cmd_train(tr);
        if (*rnd) return cmd_render(rd);
        if (*msh) return cmd_extract_mesh(me);
        if (*evl) return cmd_eval(ev);
    } catch (const InvalidParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace sdfsplat::cli
