#include "sdfsplat/train.hpp"

#include "sdfsplat/error.hpp"
#include "sdfsplat/metrics.hpp"
#include "sdfsplat/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace sdfsplat {

void TrainConfig::validate() const {
    schedule.validate();
    lr.validate();
    densify.validate();
    weights.validate();
    if (densify_from < 0) throw InvalidParameter("densify_from must be non-negative");
    if (sh_degree_interval <= 0) throw InvalidParameter("sh_degree_interval must be positive");
    if (eval_interval < 0) throw InvalidParameter("eval_interval must be non-negative");
    if (init_points == 0) throw InvalidParameter("init_points must be positive");
    if (!(init_opacity > 0.0 && init_opacity < 1.0)) throw InvalidParameter("init_opacity must lie in (0, 1)");
    if (tile_size <= 0) throw InvalidParameter("tile_size must be positive");
}

double camera_extent(std::span<const Camera> cameras) {
    if (cameras.empty()) return 0.0;
    Vec3 centroid = Vec3::Zero();
    for (const auto& c : cameras) centroid += c.center();
    centroid /= static_cast<double>(cameras.size());
    double r = 0.0;
    for (const auto& c : cameras) r = std::max(r, (c.center() - centroid).norm());
    return 1.1 * r;
}

namespace {

Vec3 backproject(const Camera& cam, double u, double v, double z) {
    const Vec3 view((u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z);
    return cam.rotation.transpose() * (view - cam.translation);
}

// sqrt of the mean squared distance to the 3 nearest other points.
std::vector<double> neighbor_scales(const std::vector<Vec3>& pts) {
    std::vector<double> out(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        std::array<double, 3> best{INFINITY, INFINITY, INFINITY};
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j == i) continue;
            const double d = (pts[i] - pts[j]).squaredNorm();
            if (d < best[2]) {
                best[2] = d;
                std::sort(best.begin(), best.end());
            }
        }
        double sum = 0.0;
        int n = 0;
        for (double d : best)
            if (std::isfinite(d)) sum += d, ++n;
        out[i] = n > 0 ? std::sqrt(std::max(sum / n, 1e-14)) : 0.01;
    }, 16);
    return out;
}

}  // namespace

GaussianSet initialize_gaussians(const SceneDataset& scene, std::size_t count, double opacity, std::uint64_t seed,
                                 bool from_depth) {
    std::mt19937_64 rng(seed);
    std::vector<Vec3> pts;
    std::vector<Vec3> colors;
    if (from_depth && scene.has_depth()) {
        struct Sample {
            int cam, x, y;
        };
        std::vector<Sample> valid;
        for (int c : scene.train) {
            const Image& d = scene.depth_maps[static_cast<std::size_t>(c)];
            for (int y = 0; y < d.height; ++y)
                for (int x = 0; x < d.width; ++x)
                    if (d(x, y) > 0.0) valid.push_back({c, x, y});
        }
        std::vector<Sample> picked;
        std::sample(valid.begin(), valid.end(), std::back_inserter(picked), count, rng);
        for (const Sample& s : picked) {
            const auto c = static_cast<std::size_t>(s.cam);
            pts.push_back(backproject(scene.cameras[c], s.x + 0.5, s.y + 0.5, scene.depth_maps[c](s.x, s.y)));
            const Image& img = scene.images[c];
            colors.emplace_back(img(s.x, s.y, 0), img(s.x, s.y, 1), img(s.x, s.y, 2));
        }
    }
    if (pts.empty()) {
        double radius = 0.0;
        for (const auto& c : scene.cameras) radius += c.center().norm();
        radius = 0.5 * radius / static_cast<double>(std::max<std::size_t>(scene.cameras.size(), 1));
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        while (pts.size() < count) {
            const Vec3 p(uni(rng), uni(rng), uni(rng));
            if (p.squaredNorm() > 1.0) continue;
            pts.push_back(radius * p);
            colors.push_back(Vec3::Constant(0.5));
        }
    }

    const std::vector<double> scales = neighbor_scales(pts);
    GaussianSet set;
    set.items.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Gaussian& g = set.items[i];
        g.mean = pts[i];
        g.log_scale = Vec3::Constant(std::log(scales[i]));
        g.opacity_logit = logit(opacity);
        for (int c = 0; c < 3; ++c) g.sh(0, c) = (colors[i][c] - kColorOffset) / kShC0;
    }
    return set;
}

std::optional<double> heldout_psnr(const GaussianSet& gaussians, const SceneDataset& scene, const RenderConfig& cfg) {
    if (scene.held_out.empty()) return std::nullopt;
    double sum = 0.0;
    for (int c : scene.held_out) {
        const auto i = static_cast<std::size_t>(c);
        FrameBuffer fb = render(gaussians, scene.cameras[i], cfg);
        for (double& v : fb.color.data) v = std::clamp(v, 0.0, 1.0);
        sum += std::min(psnr(fb.color, scene.images[i]), kPsnrCap);
    }
    return sum / static_cast<double>(scene.held_out.size());
}

TrainResult train(const SceneDataset& scene, const TrainConfig& cfg, const TrainCallback& on_iteration) {
    cfg.validate();
    if (scene.size() < 2) throw ConfigError("training needs at least 2 cameras");
    if (scene.train.empty()) throw ConfigError("scene has no training cameras");
    if (cfg.needs_normals() && !scene.has_normals())
        throw ConfigError("normal maps are required when the regularized stage runs with lambda_r > 0");
    scene.validate();

    TrainResult result;
    result.extent = camera_extent(scene.cameras);
    result.gaussians = initialize_gaussians(scene, cfg.init_points, cfg.init_opacity, cfg.seed, cfg.init_from_depth);
    GaussianSet& gs = result.gaussians;
    AdamState adam(gs.size());
    DensifyStats stats(gs.size());
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    RenderConfig rc;
    rc.tile_size = cfg.tile_size;
    rc.deterministic = cfg.deterministic;

    auto snapshot = [&](int iter, const std::string& label) {
        result.snapshots.push_back({iter, label, gs.size(), semi_transparent_fraction(gs)});
    };
    snapshot(0, "start");

    std::vector<int> order = scene.train;
    std::size_t cursor = order.size();
    const int total = cfg.schedule.total();
    const auto bounds = cfg.schedule.boundaries();

    for (int iter = 0; iter < total; ++iter) {
        const Stage stage = cfg.schedule.stage_at(iter);
        if (cursor == order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const auto cam_index = static_cast<std::size_t>(order[cursor++]);
        const Camera& cam = scene.cameras[cam_index];
        rc.sh_degree = std::min(kMaxShDegree, iter / cfg.sh_degree_interval);

        const FrameBuffer fb = render(gs, cam, rc);
        const ImageLoss l1 = l1_loss(fb.color, scene.images[cam_index]);
        const ImageLoss ds = dssim_loss(fb.color, scene.images[cam_index]);

        PixelGradients up;
        up.color = l1.grad;
        for (std::size_t k = 0; k < up.color.data.size(); ++k) up.color.data[k] += cfg.weights.lambda_dssim * ds.grad.data[k];

        NormalRegLoss nr;
        if (stage_uses_normal_reg(stage) && cfg.weights.lambda_r > 0.0) {
            nr = normal_reg(fb.grad_map, scene.normal_maps[cam_index], fb.alpha);
            up.grad_map = nr.grad;
            for (double& v : up.grad_map.data) v *= cfg.weights.lambda_r;
        }

        EntropyLoss ent;
        std::vector<double> opacities;
        if (stage_uses_entropy(stage)) {
            opacities.reserve(gs.size());
            for (const auto& g : gs.items) opacities.push_back(g.opacity());
            ent = entropy_loss(opacities);
        }

        ParamGradients grads = backward(gs, cam, rc, up);
        if (stage_uses_entropy(stage) && cfg.weights.lambda_entropy > 0.0)
            for (std::size_t i = 0; i < gs.size(); ++i) {
                const double a = opacities[i];
                grads.grads[i].opacity_logit += cfg.weights.lambda_entropy * ent.grad[i] * a * (1.0 - a);
            }

        IterationRecord rec;
        rec.iteration = iter;
        rec.stage = stage;
        rec.loss = total_loss(stage, cfg.weights, l1.value, ds.value, nr.value, ent.value, nr.pixels_used);

        const StepRates rates = step_rates(cfg.lr, result.extent, iter, total);
        result.skipped_rows += adam_step(gs, grads.grads, adam, rates);

        if (stage == Stage::Vanilla) {
            stats.accumulate(grads);
            const int done = iter + 1;
            if (done >= cfg.densify_from && done % cfg.densify.interval == 0) {
                densify_and_prune(gs, adam, stats, cfg.densify, result.extent, rng);
                stats.reset(gs.size());
            }
            const int reset = cfg.densify.opacity_reset_interval;
            if (reset > 0 && done % reset == 0 && done < bounds[0])
                reset_opacities(gs, adam, cfg.densify.reset_opacity);
        }

        rec.gaussians = gs.size();
        const bool last = iter + 1 == total;
        if (last || (cfg.eval_interval > 0 && (iter + 1) % cfg.eval_interval == 0)) {
            RenderConfig eval_rc = rc;
            eval_rc.sh_degree = std::min(kMaxShDegree, (iter + 1) / cfg.sh_degree_interval);
            rec.heldout_psnr = heldout_psnr(gs, scene, eval_rc);
        }
        result.trace.push_back(rec);
        if (on_iteration) on_iteration(rec);

        for (int s = 0; s < 4; ++s)
            if (iter + 1 == bounds[s] && (s == 0 || bounds[s] != bounds[s - 1]))
                snapshot(iter + 1, stage_name(static_cast<Stage>(s)));
    }
    return result;
}

std::string to_json_line(const IterationRecord& r) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["stage"] = stage_name(r.stage);
    j["total"] = r.loss.total;
    j["l1"] = r.loss.l1;
    j["dssim"] = r.loss.dssim;
    j["normal_reg"] = r.loss.normal_reg;
    j["entropy"] = r.loss.entropy;
    j["pixels_used"] = r.loss.pixels_used;
    j["gaussians"] = r.gaussians;
    if (r.heldout_psnr) j["heldout_psnr"] = std::min(*r.heldout_psnr, kPsnrCap);
    return j.dump();
}

}  // namespace sdfsplat
