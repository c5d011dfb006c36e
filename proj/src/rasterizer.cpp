#include "sdfsplat/rasterizer.hpp"

#include "projection_internal.hpp"
#include "sdfsplat/error.hpp"
#include "sdfsplat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sdfsplat {

void RenderConfig::validate() const {
    if (tile_size <= 0) throw InvalidParameter("tile_size must be positive");
    if (!(alpha_cutoff >= 0.0 && alpha_cutoff < 1.0)) throw InvalidParameter("alpha_cutoff must lie in [0, 1)");
    if (!(transmittance_floor >= 0.0 && transmittance_floor < 1.0))
        throw InvalidParameter("transmittance_floor must lie in [0, 1)");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) throw InvalidParameter("sh_degree must lie in [0, 3]");
}

RenderConfig RenderConfig::exact() {
    RenderConfig cfg;
    cfg.alpha_cutoff = 0.0;
    cfg.transmittance_floor = 0.0;
    return cfg;
}

GaussianGrad& GaussianGrad::operator+=(const GaussianGrad& o) {
    mean += o.mean;
    rotation += o.rotation;
    log_scale += o.log_scale;
    opacity_logit += o.opacity_logit;
    sh += o.sh;
    return *this;
}

bool GaussianGrad::all_finite() const {
    return mean.allFinite() && rotation.allFinite() && log_scale.allFinite() && std::isfinite(opacity_logit) &&
           sh.allFinite();
}

TileBins tile_binning(std::span<const SplatFootprint> splats, int width, int height, int tile_size) {
    if (tile_size <= 0 || width <= 0 || height <= 0) throw ContractViolation("tile_binning: invalid image or tile size");
    TileBins bins;
    bins.tile_size = tile_size;
    bins.tiles_x = (width + tile_size - 1) / tile_size;
    bins.tiles_y = (height + tile_size - 1) / tile_size;
    bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);

    std::vector<std::uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return splats[a].depth < splats[b].depth; });

    const auto tile_range = [&](double center, double half, double size, int tiles, int& lo, int& hi) {
        const double a = std::floor((center - half) / tile_size);
        const double b = std::floor((center + half) / tile_size);
        if (!(b >= 0.0) || !(center - half < size)) return false;
        lo = static_cast<int>(std::clamp(a, 0.0, static_cast<double>(tiles - 1)));
        hi = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(tiles - 1)));
        return true;
    };

    for (const std::uint32_t idx : order) {
        const SplatFootprint& s = splats[idx];
        if (s.culled) continue;
        const double hx = s.sigma_extent * std::sqrt(std::max(0.0, s.cov2d(0, 0)));
        const double hy = s.sigma_extent * std::sqrt(std::max(0.0, s.cov2d(1, 1)));
        int x0, x1, y0, y1;
        if (!tile_range(s.mean2d.x(), hx, width, bins.tiles_x, x0, x1)) continue;
        if (!tile_range(s.mean2d.y(), hy, height, bins.tiles_y, y0, y1)) continue;
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(idx);
    }
    return bins;
}

namespace {

/// Forward quantities of one splat for one view.
struct Prepared {
    bool visible = false;
    Vec2 mean2d = Vec2::Zero();
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;
    double opacity = 0.0;
    /// Exponent below which the weight falls under the alpha cutoff.
    double log_threshold = -std::numeric_limits<double>::infinity();
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    Vec3 proxy = Vec3::Zero();
};

struct ViewSetup {
    std::vector<Prepared> splats;
    TileBins bins;
};

ViewSetup prepare_view(const GaussianSet& set, const Camera& cam, const RenderConfig& cfg) {
    const std::size_t n = set.size();
    ViewSetup view;
    view.splats.resize(n);
    std::vector<SplatFootprint> footprints(n);
    const Vec3 cam_center = cam.center();

    parallel_for(
        n,
        [&](std::size_t i) {
            const Gaussian& g = set.items[i];
            SplatFootprint& fp = footprints[i];
            fp.culled = true;
            const Vec3 v = cam.to_view(g.mean);
            if (!(v.z() > cam.near && v.z() < cam.far)) return;

            const Mat3 r = rotation_matrix(g.rotation);
            const auto proj = detail::project(v, detail::covariance(r, g.log_scale), cam);
            const double det = proj.cov2d.determinant();
            if (!(det > 0.0) || !std::isfinite(det)) return;

            Prepared& p = view.splats[i];
            p.opacity = g.opacity();
            double extent = std::numeric_limits<double>::infinity();
            if (cfg.alpha_cutoff > 0.0) {
                if (p.opacity < cfg.alpha_cutoff) return;
                p.log_threshold = std::log(cfg.alpha_cutoff / p.opacity);
                extent = std::max(3.0, std::sqrt(-2.0 * p.log_threshold));
            }
            p.visible = true;
            p.mean2d = proj.mean2d;
            p.conic_a = proj.cov2d(1, 1) / det;
            p.conic_b = -proj.cov2d(0, 1) / det;
            p.conic_c = proj.cov2d(0, 0) / det;
            p.depth = v.z();
            p.color = sh_to_color(g.sh, (g.mean - cam_center).normalized(), cfg.sh_degree);
            p.proxy = cam.rotation * r.col(smallest_axis(g.log_scale));

            fp.culled = false;
            fp.mean2d = proj.mean2d;
            fp.cov2d = proj.cov2d;
            fp.depth = v.z();
            fp.sigma_extent = extent;
        },
        256);

    view.bins = tile_binning(footprints, cam.width, cam.height, cfg.tile_size);
    return view;
}

/// One blended splat at one pixel.
struct Contribution {
    std::uint32_t slot;  // position within the tile list
    double weight;       // alpha * G
    double gauss;        // G = exp(power)
    double transmittance;
    double dx, dy;
};

/// Runs the compositing loop of a pixel; `visit` sees every blended splat in
/// front-to-back order. Returns the final transmittance.
template <typename Visit>
double composite_pixel(const std::vector<Prepared>& splats, const std::vector<std::uint32_t>& list, double px,
                       double py, const RenderConfig& cfg, Visit&& visit) {
    double t = 1.0;
    for (std::uint32_t slot = 0; slot < list.size(); ++slot) {
        const Prepared& s = splats[list[slot]];
        const double dx = px - s.mean2d.x();
        const double dy = py - s.mean2d.y();
        const double power = -0.5 * (s.conic_a * dx * dx + s.conic_c * dy * dy) - s.conic_b * dx * dy;
        if (power < s.log_threshold) continue;
        const double gauss = std::exp(power);
        const double w = s.opacity * gauss;
        if (w < cfg.alpha_cutoff) continue;
        visit(Contribution{slot, w, gauss, t, dx, dy});
        t *= 1.0 - w;
        if (t < cfg.transmittance_floor) break;
    }
    return t;
}

template <typename Body>
void for_each_tile_pixel(const TileBins& bins, std::size_t tile, int width, int height, Body&& body) {
    const int tx = static_cast<int>(tile % bins.tiles_x);
    const int ty = static_cast<int>(tile / bins.tiles_x);
    const int x_end = std::min(width, (tx + 1) * bins.tile_size);
    const int y_end = std::min(height, (ty + 1) * bins.tile_size);
    for (int y = ty * bins.tile_size; y < y_end; ++y)
        for (int x = tx * bins.tile_size; x < x_end; ++x) body(x, y);
}

/// Screen-space gradient of one splat accumulated within one tile.
struct SplatGrad2D {
    double mean_x = 0.0, mean_y = 0.0;
    double conic_a = 0.0, conic_b = 0.0, conic_c = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    double depth = 0.0;
    Vec3 proxy = Vec3::Zero();
    bool touched = false;

    void add(const SplatGrad2D& o) {
        mean_x += o.mean_x;
        mean_y += o.mean_y;
        conic_a += o.conic_a;
        conic_b += o.conic_b;
        conic_c += o.conic_c;
        opacity += o.opacity;
        color += o.color;
        depth += o.depth;
        proxy += o.proxy;
        touched = touched || o.touched;
    }
};

void check_upstream(const Image& img, const Camera& cam, int channels, const char* name) {
    if (img.empty()) return;
    if (img.width != cam.width || img.height != cam.height || img.channels != channels)
        throw ContractViolation(std::string("backward: upstream ") + name + " gradient has the wrong shape");
}

Vec3 pixel_vec3(const Image& img, int x, int y) {
    if (img.empty()) return Vec3::Zero();
    return Vec3(img(x, y, 0), img(x, y, 1), img(x, y, 2));
}

double pixel_scalar(const Image& img, int x, int y) { return img.empty() ? 0.0 : img(x, y); }

/// d R(q) / d q_k for a unit versor q = (w, x, y, z), contracted with `g`.
Vec4 rotation_vjp(const Vec4& q, const Mat3& g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 dw, dx, dy, dz;
    dw << 0, -z, y, z, 0, -x, -y, x, 0;
    dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    return 2.0 * Vec4(g.cwiseProduct(dw).sum(), g.cwiseProduct(dx).sum(), g.cwiseProduct(dy).sum(),
                      g.cwiseProduct(dz).sum());
}

GaussianGrad chain_to_parameters(const Gaussian& g, const Camera& cam, const RenderConfig& cfg, const SplatGrad2D& s) {
    GaussianGrad out;
    const double qn = g.rotation.norm();
    const Vec4 q = g.rotation / qn;
    const Mat3 r = rotation_matrix(q);
    const Vec3 var = (2.0 * g.log_scale).array().exp();
    const Mat3 sigma = r * var.asDiagonal() * r.transpose();
    const Mat3& w = cam.rotation;
    const Vec3 t = cam.to_view(g.mean);
    const auto proj = detail::project(t, sigma, cam);
    const Mat3 m = w * sigma * w.transpose();
    const Mat2 conic = proj.cov2d.inverse();

    // Conic -> 2D covariance -> view covariance / Jacobian.
    Mat2 g_conic;
    g_conic << s.conic_a, 0.5 * s.conic_b, 0.5 * s.conic_b, s.conic_c;
    const Mat2 g_cov2d = -conic * g_conic * conic;
    const Mat3 g_m = proj.jacobian.transpose() * g_cov2d * proj.jacobian;
    const detail::Mat23 g_j = 2.0 * g_cov2d * proj.jacobian * m;
    const Mat3 g_sigma = w.transpose() * g_m * w;

    Mat3 g_r = 2.0 * g_sigma * r * var.asDiagonal();
    const Mat3 local = r.transpose() * g_sigma * r;
    for (int k = 0; k < 3; ++k) out.log_scale[k] = 2.0 * var[k] * local(k, k);
    g_r.col(smallest_axis(g.log_scale)) += w.transpose() * s.proxy;

    // View-space position.
    const double fx = cam.fx, fy = cam.fy;
    const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_t;
    g_t.x() = s.mean_x * fx * iz + g_j(0, 2) * (-fx * iz2);
    g_t.y() = s.mean_y * fy * iz + g_j(1, 2) * (-fy * iz2);
    g_t.z() = -s.mean_x * fx * t.x() * iz2 - s.mean_y * fy * t.y() * iz2 + g_j(0, 0) * (-fx * iz2) +
              g_j(1, 1) * (-fy * iz2) + g_j(0, 2) * (2.0 * fx * t.x() * iz3) + g_j(1, 2) * (2.0 * fy * t.y() * iz3) +
              s.depth;
    out.mean = w.transpose() * g_t;

    // View-dependent color.
    const Vec3 offset = g.mean - cam.center();
    const double len = offset.norm();
    const Vec3 dir = offset / len;
    std::array<double, kShBasisCount> basis;
    std::array<Vec3, kShBasisCount> basis_grad;
    sh_basis_with_gradient(dir, basis, basis_grad);
    Vec3 g_dir = Vec3::Zero();
    const int count = sh_basis_count(cfg.sh_degree);
    for (int k = 0; k < count; ++k) {
        out.sh.row(k) = basis[k] * s.color.transpose();
        g_dir += basis_grad[k] * g.sh.row(k).dot(s.color.transpose());
    }
    out.mean += (g_dir - dir * dir.dot(g_dir)) / len;

    const double alpha = g.opacity();
    out.opacity_logit = s.opacity * alpha * (1.0 - alpha);

    const Vec4 g_q = rotation_vjp(q, g_r);
    out.rotation = (g_q - q * q.dot(g_q)) / qn;
    return out;
}

}  // namespace

FrameBuffer render(const GaussianSet& gaussians, const Camera& cam, const RenderConfig& cfg) {
    cfg.validate();
    const int w = cam.width, h = cam.height;
    FrameBuffer fb{Image(w, h, 3), Image(w, h, 1), Image(w, h, 1), Image(w, h, 3)};
    const ViewSetup view = prepare_view(gaussians, cam, cfg);

    parallel_for(view.bins.lists.size(), [&](std::size_t tile) {
        const auto& list = view.bins.lists[tile];
        for_each_tile_pixel(view.bins, tile, w, h, [&](int x, int y) {
            Vec3 color = Vec3::Zero(), grad = Vec3::Zero();
            double depth = 0.0;
            const double t = composite_pixel(view.splats, list, x + 0.5, y + 0.5, cfg, [&](const Contribution& c) {
                const Prepared& s = view.splats[list[c.slot]];
                const double wt = c.weight * c.transmittance;
                color += wt * s.color;
                depth += wt * s.depth;
                grad += wt * s.proxy;
            });
            color += t * cfg.background;
            for (int c = 0; c < 3; ++c) {
                fb.color(x, y, c) = color[c];
                fb.grad_map(x, y, c) = grad[c];
            }
            fb.depth(x, y) = depth;
            fb.alpha(x, y) = 1.0 - t;
        });
    });
    return fb;
}

ParamGradients backward(const GaussianSet& gaussians, const Camera& cam, const RenderConfig& cfg,
                        const PixelGradients& up) {
    cfg.validate();
    check_upstream(up.color, cam, 3, "color");
    check_upstream(up.depth, cam, 1, "depth");
    check_upstream(up.alpha, cam, 1, "alpha");
    check_upstream(up.grad_map, cam, 3, "grad_map");

    const int w = cam.width, h = cam.height;
    const ViewSetup view = prepare_view(gaussians, cam, cfg);
    const std::size_t tiles = view.bins.lists.size();
    std::vector<std::vector<SplatGrad2D>> tile_grads(tiles);

    parallel_for(tiles, [&](std::size_t tile) {
        const auto& list = view.bins.lists[tile];
        auto& local = tile_grads[tile];
        local.assign(list.size(), SplatGrad2D{});
        for (auto& g : local) g.touched = true;
        std::vector<Contribution> contribs;
        for_each_tile_pixel(view.bins, tile, w, h, [&](int x, int y) {
            const Vec3 g_color = pixel_vec3(up.color, x, y);
            const Vec3 g_grad = pixel_vec3(up.grad_map, x, y);
            const double g_depth = pixel_scalar(up.depth, x, y);
            const double g_alpha = pixel_scalar(up.alpha, x, y);
            if (g_color.isZero(0.0) && g_grad.isZero(0.0) && g_depth == 0.0 && g_alpha == 0.0) return;

            contribs.clear();
            composite_pixel(view.splats, list, x + 0.5, y + 0.5, cfg,
                            [&](const Contribution& c) { contribs.push_back(c); });

            // `rest` is the upstream-weighted value composited behind splat i,
            // seen through the splats between i and the background.
            double rest = g_color.dot(cfg.background);
            for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
                const Contribution& c = *it;
                const Prepared& s = view.splats[list[c.slot]];
                SplatGrad2D& acc = local[c.slot];
                const double wt = c.weight * c.transmittance;
                const double feature = g_color.dot(s.color) + g_depth * s.depth + g_grad.dot(s.proxy) + g_alpha;

                acc.color += wt * g_color;
                acc.depth += wt * g_depth;
                acc.proxy += wt * g_grad;

                const double g_weight = c.transmittance * (feature - rest);
                rest = feature * c.weight + (1.0 - c.weight) * rest;

                acc.opacity += g_weight * c.gauss;
                const double g_power = g_weight * c.weight;
                acc.mean_x += g_power * (s.conic_a * c.dx + s.conic_b * c.dy);
                acc.mean_y += g_power * (s.conic_b * c.dx + s.conic_c * c.dy);
                acc.conic_a += g_power * (-0.5 * c.dx * c.dx);
                acc.conic_b += g_power * (-c.dx * c.dy);
                acc.conic_c += g_power * (-0.5 * c.dy * c.dy);
            }
        });
    });

    const std::size_t n = gaussians.size();
    std::vector<SplatGrad2D> screen(n);
    for (std::size_t tile = 0; tile < tiles; ++tile) {
        const auto& list = view.bins.lists[tile];
        for (std::size_t slot = 0; slot < list.size(); ++slot) screen[list[slot]].add(tile_grads[tile][slot]);
    }

    ParamGradients out(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            const SplatGrad2D& s = screen[i];
            if (!s.touched || !view.splats[i].visible) return;
            out.hit_count[i] = 1;
            out.mean2d_grad_norm[i] = std::hypot(s.mean_x * 0.5 * w, s.mean_y * 0.5 * h);
            out.grads[i] = chain_to_parameters(gaussians.items[i], cam, cfg, s);
        },
        64);
    return out;
}

}  // namespace sdfsplat
