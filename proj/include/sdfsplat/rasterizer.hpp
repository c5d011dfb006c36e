#pragma once

#include "sdfsplat/gaussian.hpp"
#include "sdfsplat/image.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sdfsplat {

/// Rendered channels of one view.
struct FrameBuffer {
    Image color;     ///< H x W x 3, composited over the background, unclamped.
    Image depth;     ///< H x W, alpha-weighted view-space depth (not normalized by alpha).
    Image alpha;     ///< H x W, 1 - final transmittance.
    Image grad_map;  ///< H x W x 3, alpha-blended camera-space gradient proxies.
};

struct RenderConfig {
    int tile_size = 16;
    /// Splat weights below this are skipped. 0 disables the cutoff.
    double alpha_cutoff = 1.0 / 255.0;
    /// Compositing stops once transmittance drops below this. 0 disables early stop.
    double transmittance_floor = 1e-4;
    Vec3 background = Vec3::Zero();
    /// Per-tile partial gradients are always reduced in tile order; the flag is
    /// kept so callers can state the requirement explicitly.
    bool deterministic = true;
    int sh_degree = kMaxShDegree;

    void validate() const;
    /// Cutoffs and early termination disabled: every splat reaches every pixel.
    static RenderConfig exact();
};

/// Per-Gaussian gradient, laid out like Gaussian.
struct GaussianGrad {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    ShCoeffs sh = ShCoeffs::Zero();

    GaussianGrad& operator+=(const GaussianGrad& o);
    bool all_finite() const;
};

struct ParamGradients {
    std::vector<GaussianGrad> grads;
    /// |dL/d mean2d| in half-image units (pixels * 2 / size), the usual densification signal.
    std::vector<double> mean2d_grad_norm;
    /// 1 when the Gaussian touched at least one tile of this view.
    std::vector<int> hit_count;

    explicit ParamGradients(std::size_t n = 0) : grads(n), mean2d_grad_norm(n, 0.0), hit_count(n, 0) {}
    std::size_t size() const { return grads.size(); }
};

/// Upstream dL/d(channel) images. Empty images mean a zero gradient.
struct PixelGradients {
    Image color;
    Image depth;
    Image alpha;
    Image grad_map;
};

/// Screen footprint handed to tile binning.
struct SplatFootprint {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0.0;
    /// Half-extent of the bounding ellipse in standard deviations (may be +inf).
    double sigma_extent = 3.0;
    bool culled = false;
};

struct TileBins {
    int tiles_x = 0;
    int tiles_y = 0;
    int tile_size = 0;
    /// Row-major tiles; each list holds splat indices in ascending depth.
    std::vector<std::vector<std::uint32_t>> lists;

    const std::vector<std::uint32_t>& tile(int tx, int ty) const { return lists[static_cast<std::size_t>(ty) * tiles_x + tx]; }
};

/// Assigns every non-culled splat to each tile its bounding ellipse overlaps.
/// Lists are stably sorted by depth (ties keep index order).
TileBins tile_binning(std::span<const SplatFootprint> splats, int width, int height, int tile_size);

/// Front-to-back alpha compositing of all four channels.
FrameBuffer render(const GaussianSet& gaussians, const Camera& cam, const RenderConfig& cfg);

/// Analytic gradients of the rendered channels, given dL/d(channel) per pixel.
/// The forward pass is recomputed per tile.
ParamGradients backward(const GaussianSet& gaussians, const Camera& cam, const RenderConfig& cfg,
                        const PixelGradients& upstream);

}  // namespace sdfsplat
