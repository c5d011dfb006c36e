#pragma once

// Shared fixtures and independent oracles for the test suites.

#include "sdfsplat/gaussian.hpp"
#include "sdfsplat/image.hpp"
#include "sdfsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace sdfsplat::testing {

inline constexpr int kParamsPerGaussian = 3 + 4 + 3 + 1 + 48;

/// Flat view of the i-th scalar parameter of a Gaussian.
inline double& param_ref(Gaussian& g, int k) {
    if (k < 3) return g.mean[k];
    k -= 3;
    if (k < 4) return g.rotation[k];
    k -= 4;
    if (k < 3) return g.log_scale[k];
    k -= 3;
    if (k < 1) return g.opacity_logit;
    k -= 1;
    return g.sh(k / 3, k % 3);
}

inline double param_of(const GaussianGrad& g, int k) {
    if (k < 3) return g.mean[k];
    k -= 3;
    if (k < 4) return g.rotation[k];
    k -= 4;
    if (k < 3) return g.log_scale[k];
    k -= 3;
    if (k < 1) return g.opacity_logit;
    k -= 1;
    return g.sh(k / 3, k % 3);
}

inline const char* param_group(int k) {
    if (k < 3) return "mean";
    if (k < 7) return "rotation";
    if (k < 10) return "log_scale";
    if (k < 11) return "opacity_logit";
    return "sh";
}

inline Vec4 random_versor(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q.normalized();
}

inline Camera test_camera(int w = 32, int h = 32, double f = 40.0) {
    Camera cam;
    cam.fx = cam.fy = f;
    cam.cx = 0.5 * w;
    cam.cy = 0.5 * h;
    cam.width = w;
    cam.height = h;
    cam.near = 0.1;
    cam.far = 100.0;
    return cam;
}

/// A few Gaussians in front of test_camera with well separated scales, so the
/// smallest-axis choice is stable under small perturbations.
inline GaussianSet random_scene(std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GaussianSet set;
    for (int i = 0; i < count; ++i) {
        Gaussian g;
        const double z = 2.0 + 2.0 * u(rng);
        g.mean = Vec3((u(rng) - 0.5) * 0.6 * z, (u(rng) - 0.5) * 0.6 * z, z);
        g.rotation = random_versor(rng);
        const double base = std::log(0.06 + 0.15 * u(rng));
        std::array<double, 3> s{base, base + 0.25 + 0.3 * u(rng), base + 0.6 + 0.3 * u(rng)};
        std::shuffle(s.begin(), s.end(), rng);
        g.log_scale = Vec3(s[0], s[1], s[2]);
        g.opacity_logit = -1.0 + 3.0 * u(rng);
        for (int k = 0; k < kShBasisCount; ++k)
            for (int c = 0; c < 3; ++c) g.sh(k, c) = (u(rng) - 0.5) * (k == 0 ? 1.5 : 0.4);
        set.items.push_back(g);
    }
    return set;
}

/// Flat, nearly opaque Gaussians tiling a sphere: a stand-in for a converged
/// reconstruction. The smallest axis of every Gaussian is the outward normal.
inline GaussianSet surfel_sphere(int count, double radius, const Vec3& center = Vec3::Zero(),
                                 const Vec3& rgb = Vec3(0.8, 0.5, 0.3)) {
    GaussianSet set;
    const double golden = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
    const double spacing = radius * std::sqrt(4.0 * 3.14159265358979323846 / count);
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(1.0 - z * z);
        const Vec3 n(r * std::cos(golden * i), r * std::sin(golden * i), z);
        Gaussian g;
        g.mean = center + radius * n;
        const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n);
        g.rotation = Vec4(q.w(), q.x(), q.y(), q.z());
        g.log_scale = Vec3(std::log(0.7 * spacing), std::log(0.7 * spacing), std::log(0.02 * spacing));
        g.opacity_logit = logit(0.98);
        g.sh.row(0) = ((rgb - Vec3::Constant(kColorOffset)) / kShC0).transpose();
        set.items.push_back(g);
    }
    return set;
}

inline Image random_image(std::mt19937_64& rng, int w, int h, int c, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Image img(w, h, c);
    for (double& v : img.data) v = u(rng);
    return img;
}

/// Untiled renderer: every Gaussian at every pixel, no cutoffs, no early stop,
/// generic 2x2 inverse. Built only from the public single-Gaussian operations.
inline FrameBuffer brute_force_render(const GaussianSet& set, const Camera& cam, const Vec3& background,
                                      int sh_degree = kMaxShDegree) {
    struct Item {
        double depth;
        Vec2 mean;
        Mat2 inv;
        double alpha;
        Vec3 color;
        Vec3 proxy;
    };
    std::vector<Item> items;
    for (const auto& g : set.items) {
        const auto s = project_to_screen(g, cam);
        if (!s) continue;
        items.push_back({s->depth, s->mean2d, s->cov2d.inverse(), g.opacity(),
                         sh_to_color(g.sh, (g.mean - cam.center()).normalized(), sh_degree),
                         cam.rotation * gradient_proxy(g)});
    }
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.depth < b.depth; });

    FrameBuffer fb{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1), Image(cam.width, cam.height, 1),
                   Image(cam.width, cam.height, 3)};
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Vec2 p(x + 0.5, y + 0.5);
            double t = 1.0, depth = 0.0;
            Vec3 color = Vec3::Zero(), grad = Vec3::Zero();
            for (const Item& it : items) {
                const Vec2 d = p - it.mean;
                const double w = it.alpha * std::exp(-0.5 * d.dot(it.inv * d));
                color += it.color * w * t;
                grad += it.proxy * w * t;
                depth += it.depth * w * t;
                t *= 1.0 - w;
            }
            color += t * background;
            for (int c = 0; c < 3; ++c) {
                fb.color(x, y, c) = color[c];
                fb.grad_map(x, y, c) = grad[c];
            }
            fb.depth(x, y) = depth;
            fb.alpha(x, y) = 1.0 - t;
        }
    }
    return fb;
}

inline double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

/// Mean absolute difference and its subgradient.
inline double l1_with_grad(const Image& rendered, const Image& target, Image* grad) {
    double sum = 0.0;
    const double inv = 1.0 / static_cast<double>(rendered.data.size());
    if (grad) *grad = Image(rendered.width, rendered.height, rendered.channels);
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        if (grad) grad->data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv;
    }
    return sum * inv;
}

/// Central difference of f with respect to one scalar.
inline double central_difference(double& x, double eps, const std::function<double()>& f) {
    const double x0 = x;
    x = x0 + eps;
    const double fp = f();
    x = x0 - eps;
    const double fm = f();
    x = x0;
    return (fp - fm) / (2.0 * eps);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max(floor, std::abs(numeric));
}

/// Mirrors tests/fixtures/ssim_reference.py.
inline std::pair<Image, Image> ssim_fixture_pair(int w, int h, int k) {
    Image a(w, h, 3), b(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const double av = 0.5 + 0.4 * std::sin(0.37 * x + 0.21 * y * (k + 1) + 1.3 * c + k);
                a(x, y, c) = av;
                b(x, y, c) = std::clamp(av + 0.15 * std::cos(0.53 * x * (k + 1) - 0.29 * y + 0.7 * c), 0.0, 1.0);
            }
    return {a, b};
}

struct SsimFixture {
    int w, h, k;
    double expected;
};

// structural_similarity(gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
// data_range=1, channel_axis=2) from scikit-image 0.25.
inline constexpr SsimFixture kSsimFixtures[] = {
    {16, 16, 0, 0.841810359894}, {24, 20, 1, 0.874545343803}, {32, 32, 2, 0.908299157662},
    {40, 28, 3, 0.925504618724}, {11, 13, 4, 0.927846815333},
};

}  // namespace sdfsplat::testing
