#include "sdfsplat/losses.hpp"

#include "sdfsplat/error.hpp"
#include "ssim_internal.hpp"

#include <array>
#include <cmath>
#include <string>

namespace sdfsplat {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.empty()) throw ContractViolation(std::string(what) + ": image shapes differ or are empty");
}

std::array<double, detail::kSsimWindow> window_1d() {
    std::array<double, detail::kSsimWindow> w{};
    double sum = 0.0;
    for (int k = 0; k < detail::kSsimWindow; ++k) {
        const double d = k - detail::kSsimWindow / 2;
        w[k] = std::exp(-d * d / (2.0 * detail::kSsimSigma * detail::kSsimSigma));
        sum += w[k];
    }
    for (double& v : w) v /= sum;
    return w;
}

/// Valid separable correlation: (h x w) -> (h - 10) x (w - 10).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::array<double, detail::kSsimWindow>& k) {
    const int n = detail::kSsimWindow;
    const int wo = w - n + 1, ho = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * wo);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * wo + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ho) * wo);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * wo + x];
            out[static_cast<std::size_t>(y) * wo + x] = s;
        }
    return out;
}

/// Adjoint of filter_valid: (h - 10) x (w - 10) -> h x w.
std::vector<double> filter_adjoint(const std::vector<double>& src, int w, int h,
                                   const std::array<double, detail::kSsimWindow>& k) {
    const int n = detail::kSsimWindow;
    const int wo = w - n + 1, ho = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * wo, 0.0);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            const double v = src[static_cast<std::size_t>(y) * wo + x];
            for (int i = 0; i < n; ++i) tmp[static_cast<std::size_t>(y + i) * wo + x] += k[i] * v;
        }
    std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wo; ++x) {
            const double v = tmp[static_cast<std::size_t>(y) * wo + x];
            for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(y) * w + x + i] += k[i] * v;
        }
    return out;
}

}  // namespace

namespace detail {

double ssim_kernel(const Image& x, const Image& y, Image* grad_x) {
    require_same_shape(x, y, "ssim");
    if (x.width < kSsimWindow || x.height < kSsimWindow)
        throw ContractViolation("ssim: image smaller than the 11x11 window");
    const auto k = window_1d();
    const int w = x.width, h = x.height, channels = x.channels;
    const int wo = w - kSsimWindow + 1, ho = h - kSsimWindow + 1;
    const std::size_t npix = x.pixel_count(), nloc = static_cast<std::size_t>(wo) * ho;
    const double scale = 1.0 / (static_cast<double>(nloc) * channels);
    if (grad_x) *grad_x = Image(w, h, channels);

    double total = 0.0;
    std::vector<double> px(npix), py(npix), pxx(npix), pyy(npix), pxy(npix);
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < npix; ++i) {
            px[i] = x.data[i * channels + c];
            py[i] = y.data[i * channels + c];
            pxx[i] = px[i] * px[i];
            pyy[i] = py[i] * py[i];
            pxy[i] = px[i] * py[i];
        }
        const auto mx = filter_valid(px, w, h, k), my = filter_valid(py, w, h, k);
        const auto exx = filter_valid(pxx, w, h, k), eyy = filter_valid(pyy, w, h, k);
        const auto exy = filter_valid(pxy, w, h, k);
        std::vector<double> g_mu, g_exx, g_exy;
        if (grad_x) {
            g_mu.resize(nloc);
            g_exx.resize(nloc);
            g_exy.resize(nloc);
        }
        for (std::size_t i = 0; i < nloc; ++i) {
            const double sxx = exx[i] - mx[i] * mx[i];
            const double syy = eyy[i] - my[i] * my[i];
            const double sxy = exy[i] - mx[i] * my[i];
            const double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
            const double a2 = 2.0 * sxy + kSsimC2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
            const double b2 = sxx + syy + kSsimC2;
            const double s = a1 * a2 / (b1 * b2);
            total += s;
            if (grad_x) {
                const double inv = scale / (b1 * b2);
                g_mu[i] = 2.0 * my[i] * (a2 - a1) * inv + 2.0 * mx[i] * s * scale * (1.0 / b2 - 1.0 / b1);
                g_exx[i] = -s * scale / b2;
                g_exy[i] = 2.0 * a1 * inv;
            }
        }
        if (grad_x) {
            const auto t_mu = filter_adjoint(g_mu, w, h, k);
            const auto t_xx = filter_adjoint(g_exx, w, h, k);
            const auto t_xy = filter_adjoint(g_exy, w, h, k);
            for (std::size_t i = 0; i < npix; ++i)
                grad_x->data[i * channels + c] = t_mu[i] + 2.0 * px[i] * t_xx[i] + py[i] * t_xy[i];
        }
    }
    return total * scale;
}

}  // namespace detail

const char* stage_name(Stage stage) {
    switch (stage) {
        case Stage::Vanilla: return "vanilla";
        case Stage::Opacity: return "opacity";
        case Stage::Regularized: return "regularized";
        case Stage::Refinement: return "refinement";
    }
    return "unknown";
}

bool stage_uses_entropy(Stage stage) { return stage == Stage::Opacity; }
bool stage_uses_normal_reg(Stage stage) { return stage == Stage::Regularized; }

void LossWeights::validate() const {
    if (!(lambda_dssim >= 0.0) || !(lambda_r >= 0.0) || !(lambda_entropy >= 0.0))
        throw InvalidParameter("loss weights must be non-negative");
}

ImageLoss l1_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "l1_loss");
    ImageLoss out{0.0, Image(rendered.width, rendered.height, rendered.channels)};
    const double inv = 1.0 / static_cast<double>(rendered.data.size());
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        out.value += std::abs(d);
        out.grad.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    out.value *= inv;
    return out;
}

ImageLoss dssim_loss(const Image& rendered, const Image& target) {
    ImageLoss out;
    const double s = detail::ssim_kernel(rendered, target, &out.grad);
    out.value = 0.5 * (1.0 - s);
    for (double& g : out.grad.data) g *= -0.5;
    return out;
}

EntropyLoss entropy_loss(std::span<const double> opacities) {
    EntropyLoss out;
    out.grad.resize(opacities.size(), 0.0);
    if (opacities.empty()) return out;
    const double inv = 1.0 / static_cast<double>(opacities.size());
    for (std::size_t i = 0; i < opacities.size(); ++i) {
        const double a = opacities[i];
        out.value -= a * std::log(a) + (1.0 - a) * std::log1p(-a);
        out.grad[i] = (std::log1p(-a) - std::log(a)) * inv;
    }
    out.value *= inv;
    return out;
}

NormalRegLoss normal_reg(const Image& grad_map, const Image& normal_map, const Image& alpha, const Image& mask) {
    require_same_shape(grad_map, normal_map, "normal_reg");
    if (grad_map.channels != 3) throw ContractViolation("normal_reg: expected 3-channel maps");
    if (alpha.width != grad_map.width || alpha.height != grad_map.height || alpha.channels != 1)
        throw ContractViolation("normal_reg: alpha shape mismatch");
    if (!mask.empty() && (mask.width != grad_map.width || mask.height != grad_map.height || mask.channels != 1))
        throw ContractViolation("normal_reg: mask shape mismatch");

    NormalRegLoss out{0.0, Image(grad_map.width, grad_map.height, 3), 0};
    const std::size_t n = grad_map.pixel_count();
    std::vector<double> cosines(n, 0.0);
    std::vector<char> used(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        if (!mask.empty() && mask.data[p] == 0.0) continue;
        if (!(alpha.data[p] > kNormalRegAlphaMin)) continue;
        const double* g = &grad_map.data[3 * p];
        const double* nn = &normal_map.data[3 * p];
        const double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        const double nnorm = std::sqrt(nn[0] * nn[0] + nn[1] * nn[1] + nn[2] * nn[2]);
        if (!(gn > kNormalRegNormFloor) || !(nnorm > kNormalRegNormFloor)) continue;
        cosines[p] = (g[0] * nn[0] + g[1] * nn[1] + g[2] * nn[2]) / (gn * nnorm);
        used[p] = 1;
        ++out.pixels_used;
    }
    if (out.pixels_used == 0) return out;
    const double inv = 1.0 / static_cast<double>(out.pixels_used);
    for (std::size_t p = 0; p < n; ++p) {
        if (!used[p]) continue;
        const double cosv = cosines[p];
        out.value += 1.0 - std::abs(cosv);
        if (cosv == 0.0) continue;
        const double* g = &grad_map.data[3 * p];
        const double* nn = &normal_map.data[3 * p];
        const double gn = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        const double nnorm = std::sqrt(nn[0] * nn[0] + nn[1] * nn[1] + nn[2] * nn[2]);
        const double sgn = cosv > 0.0 ? 1.0 : -1.0;
        for (int c = 0; c < 3; ++c)
            out.grad.data[3 * p + c] = -sgn * (nn[c] / nnorm - cosv * g[c] / gn) / gn * inv;
    }
    out.value *= inv;
    return out;
}

LossReport total_loss(Stage stage, const LossWeights& weights, double l1, double dssim, double normal_reg_value,
                      double entropy, std::size_t pixels_used) {
    LossReport r;
    r.l1 = l1;
    r.dssim = dssim;
    r.entropy = stage_uses_entropy(stage) ? entropy : 0.0;
    r.normal_reg = stage_uses_normal_reg(stage) ? normal_reg_value : 0.0;
    r.pixels_used = stage_uses_normal_reg(stage) ? pixels_used : 0;
    r.total = r.l1 + weights.lambda_dssim * r.dssim + weights.lambda_r * r.normal_reg +
              weights.lambda_entropy * r.entropy;
    return r;
}

}  // namespace sdfsplat
