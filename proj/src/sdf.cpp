#include "sdfsplat/sdf.hpp"

#include "sdfsplat/error.hpp"
#include "sdfsplat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sdfsplat {

namespace {

constexpr double kCutoffSq = kDensityCutoffSigma * kDensityCutoffSigma;

Mat3 inverse_covariance(const Gaussian& g) {
    const Mat3 r = rotation_matrix(g.rotation);
    const Vec3 inv_var = (-2.0 * g.log_scale).array().exp();
    return r * inv_var.asDiagonal() * r.transpose();
}

}  // namespace

double density(const Vec3& p, const GaussianSet& gaussians) {
    double sum = 0.0;
    for (const auto& g : gaussians.items) {
        const Vec3 d = p - g.mean;
        const double m = d.dot(inverse_covariance(g) * d);
        if (m > kCutoffSq) continue;
        sum += g.opacity() * std::exp(-0.5 * m);
    }
    return sum;
}

Vec3 density_gradient(const Vec3& p, const GaussianSet& gaussians) {
    Vec3 sum = Vec3::Zero();
    for (const auto& g : gaussians.items) {
        const Vec3 d = p - g.mean;
        const Mat3 inv = inverse_covariance(g);
        const Vec3 id = inv * d;
        const double m = d.dot(id);
        if (m > kCutoffSq) continue;
        sum -= g.opacity() * std::exp(-0.5 * m) * id;
    }
    return sum;
}

GaussianField::GaussianField(const GaussianSet& gaussians) {
    entries_.reserve(gaussians.size());
    std::vector<double> radii;
    Aabb box;
    for (const auto& g : gaussians.items) {
        entries_.push_back({g.mean, inverse_covariance(g), g.opacity(), gradient_proxy(g)});
        radii.push_back(kDensityCutoffSigma * std::exp(g.log_scale.maxCoeff()));
        box.expand(g.mean - Vec3::Constant(radii.back()));
        box.expand(g.mean + Vec3::Constant(radii.back()));
    }
    if (entries_.empty()) return;

    std::vector<double> sorted = radii;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    constexpr int kMaxDim = 96;
    cell_ = std::max({sorted[sorted.size() / 2], box.extent().maxCoeff() / kMaxDim, 1e-9});
    origin_ = box.min;
    for (int k = 0; k < 3; ++k) dims_[k] = std::max(1, static_cast<int>(std::ceil(box.extent()[k] / cell_)));

    auto cell_range = [&](std::size_t i, std::array<int, 3>& lo, std::array<int, 3>& hi) {
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::clamp(static_cast<int>(std::floor((entries_[i].mean[k] - radii[i] - origin_[k]) / cell_)), 0, dims_[k] - 1);
            hi[k] = std::clamp(static_cast<int>(std::floor((entries_[i].mean[k] + radii[i] - origin_[k]) / cell_)), 0, dims_[k] - 1);
        }
    };
    const std::size_t ncells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    std::vector<std::uint32_t> counts(ncells + 1, 0);
    std::array<int, 3> lo{}, hi{};
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        cell_range(i, lo, hi);
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x)
                    ++counts[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x + 1];
    }
    for (std::size_t c = 0; c < ncells; ++c) counts[c + 1] += counts[c];
    cell_start_ = counts;
    cell_items_.resize(counts[ncells]);
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        cell_range(i, lo, hi);
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x)
                    cell_items_[cursor[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x]++] =
                        static_cast<std::uint32_t>(i);
    }
}

template <typename F>
void GaussianField::visit(const Vec3& p, F&& f) const {
    if (entries_.empty()) return;
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k) {
        const double t = std::floor((p[k] - origin_[k]) / cell_);
        if (!(t >= 0.0 && t < dims_[k])) return;
        c[k] = static_cast<int>(t);
    }
    const std::size_t cell = (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
    for (std::uint32_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
        const Entry& e = entries_[cell_items_[k]];
        const Vec3 d = p - e.mean;
        const Vec3 id = e.inv_cov * d;
        const double m = d.dot(id);
        if (m > kCutoffSq) continue;
        f(e, id, e.opacity * std::exp(-0.5 * m));
    }
}

double GaussianField::density(const Vec3& p) const {
    double sum = 0.0;
    visit(p, [&](const Entry&, const Vec3&, double w) { sum += w; });
    return sum;
}

Vec3 GaussianField::density_gradient(const Vec3& p) const {
    Vec3 sum = Vec3::Zero();
    visit(p, [&](const Entry&, const Vec3& id, double w) { sum -= w * id; });
    return sum;
}

Vec3 GaussianField::blended_proxy(const Vec3& p) const {
    double best = -1.0;
    Vec3 reference = Vec3::Zero();
    visit(p, [&](const Entry& e, const Vec3&, double w) {
        if (w > best) {
            best = w;
            reference = e.proxy;
        }
    });
    Vec3 sum = Vec3::Zero();
    visit(p, [&](const Entry& e, const Vec3&, double w) { sum += (e.proxy.dot(reference) < 0.0 ? -w : w) * e.proxy; });
    return sum;
}

std::vector<DepthView> render_depth_views(const GaussianSet& gaussians, std::span<const Camera> cameras,
                                          const RenderConfig& cfg) {
    std::vector<DepthView> views;
    views.reserve(cameras.size());
    for (const Camera& cam : cameras) {
        FrameBuffer fb = render(gaussians, cam, cfg);
        views.push_back({cam, std::move(fb.depth), std::move(fb.alpha)});
    }
    return views;
}

namespace {

double bilinear(const Image& img, double u, double v) {
    // Continuous pixel coordinates; sample centers sit at integer + 0.5.
    const double x = std::clamp(u - 0.5, 0.0, img.width - 1.0);
    const double y = std::clamp(v - 0.5, 0.0, img.height - 1.0);
    const int x0 = std::min(static_cast<int>(x), img.width - 1), y0 = std::min(static_cast<int>(y), img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * img(x0, y0) + fx * img(x1, y0)) + fy * ((1 - fx) * img(x0, y1) + fx * img(x1, y1));
}

}  // namespace

std::optional<double> estimate_sdf(const Vec3& p, std::span<const DepthView> views) {
    std::optional<double> best;
    std::optional<double> nearest_outside;
    bool seen_through = false;
    for (const DepthView& view : views) {
        const Camera& cam = view.camera;
        const Vec3 q = cam.to_view(p);
        if (!(q.z() > cam.near && q.z() < cam.far)) continue;
        const double u = cam.fx * q.x() / q.z() + cam.cx;
        const double v = cam.fy * q.y() / q.z() + cam.cy;
        if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) continue;
        const double a = bilinear(view.alpha, u, v);
        if (a < kEmptyAlpha) seen_through = true;
        if (!(a > kVisibleAlpha)) continue;
        const double est = q.z() - bilinear(view.depth, u, v) / a;
        if (!best || std::abs(est) < std::abs(*best)) best = est;
        if (est < 0.0 && (!nearest_outside || est > *nearest_outside)) nearest_outside = est;
    }
    if (best && *best > 0.0) {
        // Free space seen by any view overrides occluded "behind the surface" estimates.
        if (nearest_outside) return nearest_outside;
        if (seen_through) return -*best;
    }
    return best;
}

Vec3 SdfGrid::spacing() const {
    Vec3 s;
    for (int k = 0; k < 3; ++k) s[k] = (bounds.max[k] - bounds.min[k]) / (resolution[k] - 1);
    return s;
}

Vec3 SdfGrid::vertex(int i, int j, int k) const {
    return bounds.min + spacing().cwiseProduct(Vec3(i, j, k));
}

SdfGrid build_sdf_grid(std::span<const DepthView> views, const Aabb& bounds, const std::array<int, 3>& resolution) {
    if (bounds.empty() || !(bounds.extent().array() > 0.0).all())
        throw ContractViolation("build_sdf_grid: empty bounds");
    for (int r : resolution)
        if (r < 2) throw ContractViolation("build_sdf_grid: resolution must be at least 2 per axis");
    SdfGrid grid;
    grid.bounds = bounds;
    grid.resolution = resolution;
    grid.sentinel = bounds.diagonal();
    grid.values.assign(static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2], grid.sentinel);
    const Vec3 step = grid.spacing();
    parallel_for(static_cast<std::size_t>(resolution[2]) * resolution[1], [&](std::size_t row) {
        const int k = static_cast<int>(row / resolution[1]), j = static_cast<int>(row % resolution[1]);
        for (int i = 0; i < resolution[0]; ++i) {
            const Vec3 p = bounds.min + step.cwiseProduct(Vec3(i, j, k));
            if (auto f = estimate_sdf(p, views)) grid.values[grid.index(i, j, k)] = *f;
        }
    });
    return grid;
}

void OrientedPointCloud::validate() const {
    if (positions.size() != normals.size()) throw ContractViolation("point cloud: positions and normals differ in length");
    for (const Vec3& n : normals)
        if (!(std::abs(n.norm() - 1.0) <= 1e-6)) throw ContractViolation("point cloud: non-unit normal");
}

OrientedPointCloud sample_level_set(const GaussianSet& gaussians, std::span<const DepthView> views, std::size_t n,
                                    const LevelSetConfig& cfg) {
    if (n == 0) throw InvalidParameter("sample_level_set: n must be at least 1");
    if (gaussians.empty()) throw DegenerateGeometry("sample_level_set: no Gaussians");
    if (cfg.bisection_steps < 0 || cfg.max_rounds < 1 || !(cfg.band_factor > 0.0))
        throw InvalidParameter("sample_level_set: invalid configuration");

    double mean_small = 0.0;
    for (const auto& g : gaussians.items) mean_small += std::exp(g.log_scale.minCoeff());
    const double band = cfg.band_factor * mean_small / static_cast<double>(gaussians.size());

    const GaussianField field(gaussians);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, gaussians.size() - 1);
    std::normal_distribution<double> normal(0.0, 1.0);

    OrientedPointCloud cloud;
    const std::size_t batch = std::max<std::size_t>(n, 1024);
    for (int round = 0; round < cfg.max_rounds && cloud.size() < n; ++round) {
        std::vector<Vec3> candidates(batch);
        for (auto& c : candidates) {
            const Gaussian& g = gaussians.items[pick(rng)];
            const Vec3 z(normal(rng), normal(rng), normal(rng));
            c = g.mean + rotation_matrix(g.rotation) * g.scale().cwiseProduct(z);
        }
        std::vector<std::optional<std::pair<Vec3, Vec3>>> results(batch);
        parallel_for(batch, [&](std::size_t i) {
            const Vec3& p = candidates[i];
            const auto f0 = estimate_sdf(p, views);
            if (!f0 || !(std::abs(*f0) < band)) return;
            Vec3 dir = field.blended_proxy(p);
            if (!(dir.norm() > 1e-12)) return;
            dir.normalize();
            const double h = std::max(2.0 * std::abs(*f0), band);
            const auto fp = estimate_sdf(p + h * dir, views);
            const auto fm = estimate_sdf(p - h * dir, views);
            // Outward means toward decreasing f; unobserved probes count as outside.
            const double vp = fp ? *fp : -h, vm = fm ? *fm : -h;
            const Vec3 outward = vp <= vm ? dir : Vec3(-dir);
            Vec3 a = p;
            double fa = *f0;
            if (fa == 0.0) {
                results[i] = std::make_pair(p, outward);
                return;
            }
            const Vec3 step = (fa > 0.0 ? outward : Vec3(-outward)) * h;
            Vec3 b = p + step;
            const auto fb = estimate_sdf(b, views);
            const double fbv = fb ? *fb : -h;
            if ((fa > 0.0) == (fbv > 0.0)) return;
            for (int s = 0; s < cfg.bisection_steps; ++s) {
                const Vec3 mid = 0.5 * (a + b);
                const auto fm_ = estimate_sdf(mid, views);
                const double fmv = fm_ ? *fm_ : -h;
                if ((fmv > 0.0) == (fa > 0.0)) {
                    a = mid;
                    fa = fmv;
                } else {
                    b = mid;
                }
            }
            results[i] = std::make_pair(Vec3(0.5 * (a + b)), outward);
        });
        for (const auto& r : results) {
            if (!r || cloud.size() >= n) continue;
            cloud.positions.push_back(r->first);
            cloud.normals.push_back(r->second);
        }
    }
    if (cloud.size() * 10 < n)
        throw DegenerateGeometry("sample_level_set: only " + std::to_string(cloud.size()) + " of " +
                                 std::to_string(n) + " points reached the level set");
    return cloud;
}

}  // namespace sdfsplat
