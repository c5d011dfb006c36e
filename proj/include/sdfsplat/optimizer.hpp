#pragma once

#include "sdfsplat/gaussian.hpp"
#include "sdfsplat/losses.hpp"
#include "sdfsplat/rasterizer.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sdfsplat {

/// Iteration counts of the four training stages, run in order.
struct StageSchedule {
    int vanilla = 7000;
    int opacity = 2000;
    int regularized = 6000;
    int refinement = 15000;

    /// Refinement fills the remainder of `total` iterations.
    static StageSchedule with_regularized(int regularized, int total = 30000);
    /// The two published variants: 6000 regularized + 15000 refinement, or
    /// 13000 + 7000 (29000 in total). Other lengths throw InvalidParameter.
    static StageSchedule published(int regularized);
    int total() const { return vanilla + opacity + regularized + refinement; }
    /// Cumulative end iteration of each stage.
    std::array<int, 4> boundaries() const;
    /// Stage of 0-based iteration `iter`. Throws ContractViolation outside [0, total).
    Stage stage_at(int iter) const;
    /// Throws InvalidParameter for negative lengths.
    void validate() const;
};

struct LearningRates {
    double mean_init = 1.6e-4;  ///< multiplied by the scene extent
    double mean_final = 1.6e-6;
    double rotation = 1e-3;
    double log_scale = 5e-3;
    double opacity_logit = 5e-2;
    double sh_dc = 2.5e-3;
    /// Higher-order SH coefficients use sh_dc / sh_rest_divisor.
    double sh_rest_divisor = 20.0;

    void validate() const;
};

/// Learning rates in effect at one iteration.
struct StepRates {
    double mean = 0.0;
    double rotation = 0.0;
    double log_scale = 0.0;
    double opacity_logit = 0.0;
    double sh_dc = 0.0;
    double sh_rest = 0.0;
};

/// Log-linear decay of the mean rate from mean_init to mean_final over `max_steps`,
/// both scaled by `extent`. Other groups are constant.
StepRates step_rates(const LearningRates& lr, double extent, int iter, int max_steps);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

/// Logits are clamped here after every step so sigmoid stays representable.
inline constexpr double kMaxOpacityLogit = 30.0;

/// Moment accumulators, one row per Gaussian.
struct AdamState {
    std::vector<GaussianGrad> m;
    std::vector<GaussianGrad> v;
    /// Per-row step counts; rows added by densification start at 0.
    std::vector<std::int64_t> steps;

    explicit AdamState(std::size_t n = 0) : m(n), v(n), steps(n, 0) {}
    std::size_t size() const { return m.size(); }
    /// Keeps rows where keep[i] is true, then appends `added` zeroed rows.
    void remap(const std::vector<bool>& keep, std::size_t added);
};

/// One Adam update. Rows with non-finite gradients are left untouched
/// (parameters and moments); their count is returned. Rotations are
/// renormalized and logits clamped afterwards.
std::size_t adam_step(GaussianSet& gaussians, std::span<const GaussianGrad> grads, AdamState& state,
                      const StepRates& rates, const AdamConfig& cfg = {});

/// Accumulated screen-space gradient norms between densification calls.
struct DensifyStats {
    std::vector<double> grad_sum;
    std::vector<int> views;

    explicit DensifyStats(std::size_t n = 0) : grad_sum(n, 0.0), views(n, 0) {}
    void accumulate(const ParamGradients& grads);
    void reset(std::size_t n);
};

struct DensifyConfig {
    int interval = 100;
    double grad_threshold = 2e-4;
    /// Split children get scales divided by this.
    double split_factor = 1.6;
    /// Gaussians with max scale at or below this fraction of the extent are cloned.
    double clone_scale_fraction = 0.01;
    double prune_opacity = 5e-3;
    /// Hard cap on the population; the strongest gradients are densified first.
    std::size_t max_gaussians = 200000;
    /// Opacities are clamped to reset_opacity every this many vanilla iterations
    /// (never on the last one). 0 disables the reset; 3000 is the usual splatting value.
    int opacity_reset_interval = 0;
    double reset_opacity = 0.01;

    void validate() const;
};

/// Clamps every opacity to at most `ceiling` and clears the opacity moments,
/// so Gaussians that are occluded or redundant fall under the prune floor.
void reset_opacities(GaussianSet& gaussians, AdamState& state, double ceiling);

struct DensifyOutcome {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clones or splits Gaussians whose mean accumulated gradient reaches the
/// threshold, then prunes transparent ones. Children are appended after the
/// survivors in index order and get zeroed Adam rows.
DensifyOutcome densify_and_prune(GaussianSet& gaussians, AdamState& state, const DensifyStats& stats,
                                 const DensifyConfig& cfg, double extent, std::mt19937_64& rng);

/// Fraction of Gaussians with opacity strictly inside (0.05, 0.95). 0 for an empty set.
double semi_transparent_fraction(const GaussianSet& gaussians);

}  // namespace sdfsplat
