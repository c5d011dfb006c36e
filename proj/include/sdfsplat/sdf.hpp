#pragma once

#include "sdfsplat/gaussian.hpp"
#include "sdfsplat/image.hpp"
#include "sdfsplat/rasterizer.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sdfsplat {

/// Gaussians farther than this Mahalanobis distance are skipped by density queries.
inline constexpr double kDensityCutoffSigma = 4.0;

/// Sum over Gaussians of opacity * exp(-0.5 d^T Sigma^-1 d).
double density(const Vec3& p, const GaussianSet& gaussians);
Vec3 density_gradient(const Vec3& p, const GaussianSet& gaussians);

/// Spatially indexed view of a GaussianSet for repeated point queries. Results
/// equal the free functions (same cutoff, same summation order).
class GaussianField {
public:
    explicit GaussianField(const GaussianSet& gaussians);

    double density(const Vec3& p) const;
    Vec3 density_gradient(const Vec3& p) const;
    /// Weighted sum of gradient proxies, each flipped to agree with the proxy of
    /// the heaviest contributor. Zero when no Gaussian reaches p.
    Vec3 blended_proxy(const Vec3& p) const;

private:
    struct Entry {
        Vec3 mean;
        Mat3 inv_cov;
        double opacity;
        Vec3 proxy;
    };
    template <typename F>
    void visit(const Vec3& p, F&& f) const;

    std::vector<Entry> entries_;
    Vec3 origin_ = Vec3::Zero();
    double cell_ = 1.0;
    std::array<int, 3> dims_{0, 0, 0};
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_items_;
};

/// Depth and alpha rendered from one camera.
struct DepthView {
    Camera camera;
    Image depth;  ///< alpha-weighted, not normalized
    Image alpha;
};

std::vector<DepthView> render_depth_views(const GaussianSet& gaussians, std::span<const Camera> cameras,
                                          const RenderConfig& cfg = {});

inline constexpr double kVisibleAlpha = 0.5;
/// A projection onto alpha below this sees empty space through p.
inline constexpr double kEmptyAlpha = 0.05;

/// Per-view estimate view_z(p) - depth/alpha at the projection of p (bilinear),
/// over views where p projects inside the image, alpha > 0.5 and near < z < far.
/// The estimate of smallest magnitude wins. Positive means behind the visible
/// surface (inside). A positive result is overruled when any view places p in
/// free space: the negative estimate nearest zero is returned, or the mirrored
/// value when p is only seen against empty background (alpha < 0.05).
/// nullopt when no view qualifies.
std::optional<double> estimate_sdf(const Vec3& p, std::span<const DepthView> views);

struct SdfGrid {
    Aabb bounds;
    std::array<int, 3> resolution{0, 0, 0};
    std::vector<double> values;  ///< x fastest, then y, then z
    /// Value stored at unobserved vertices (+ bounds diagonal).
    double sentinel = 0.0;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * resolution[1] + j) * resolution[0] + i;
    }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    Vec3 spacing() const;
    Vec3 vertex(int i, int j, int k) const;
    bool is_sentinel(int i, int j, int k) const { return at(i, j, k) == sentinel; }
};

/// Evaluates estimate_sdf at every vertex. Throws ContractViolation for empty
/// bounds or a resolution below 2.
SdfGrid build_sdf_grid(std::span<const DepthView> views, const Aabb& bounds, const std::array<int, 3>& resolution);

struct OrientedPointCloud {
    std::vector<Vec3> positions;
    std::vector<Vec3> normals;

    std::size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }
    /// Throws ContractViolation on length mismatch or non-unit normals (1e-6).
    void validate() const;
};

struct LevelSetConfig {
    /// Candidates are kept when |f| < band_factor * mean smallest Gaussian scale.
    double band_factor = 0.5;
    int bisection_steps = 8;
    /// Candidate batches drawn before giving up.
    int max_rounds = 16;
    std::uint64_t seed = 0;
};

/// Points on the zero level set of estimate_sdf with outward unit normals.
/// Throws InvalidParameter for n == 0 and DegenerateGeometry when fewer than
/// n / 10 points survive.
OrientedPointCloud sample_level_set(const GaussianSet& gaussians, std::span<const DepthView> views, std::size_t n,
                                    const LevelSetConfig& cfg = {});

}  // namespace sdfsplat
