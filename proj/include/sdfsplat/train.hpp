#pragma once

#include "sdfsplat/losses.hpp"
#include "sdfsplat/optimizer.hpp"
#include "sdfsplat/rasterizer.hpp"
#include "sdfsplat/scene.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sdfsplat {

struct TrainConfig {
    StageSchedule schedule;
    LearningRates lr;
    DensifyConfig densify;
    /// First iteration at which densification may run (vanilla stage only).
    int densify_from = 500;
    int sh_degree_interval = 1000;
    LossWeights weights;
    std::uint64_t seed = 0;
    bool deterministic = true;
    /// Held-out PSNR is computed every eval_interval iterations and after the last one. 0 = last only.
    int eval_interval = 1000;
    std::size_t init_points = 4000;
    /// Seed from training depth maps instead of random points in a ball.
    bool init_from_depth = false;
    double init_opacity = 0.1;
    int tile_size = 16;

    void validate() const;
    /// True when the normal maps are read by some iteration.
    bool needs_normals() const { return schedule.regularized > 0 && weights.lambda_r > 0.0; }
};

struct IterationRecord {
    int iteration = 0;  ///< 0-based
    Stage stage = Stage::Vanilla;
    LossReport loss;
    std::size_t gaussians = 0;
    std::optional<double> heldout_psnr;
};

/// Population statistics taken before the first iteration and at the end of each stage.
struct StageSnapshot {
    int iteration = 0;  ///< iterations completed when taken
    std::string label;  ///< "start" or the name of the stage just finished
    std::size_t gaussians = 0;
    double semi_transparent_fraction = 0.0;
};

struct TrainResult {
    GaussianSet gaussians;
    std::vector<IterationRecord> trace;
    std::vector<StageSnapshot> snapshots;
    double extent = 0.0;
    std::size_t skipped_rows = 0;
};

using TrainCallback = std::function<void(const IterationRecord&)>;

/// 1.1 times the largest distance of a camera center from their centroid.
double camera_extent(std::span<const Camera> cameras);

/// Random points in a ball of half the mean camera distance, or points
/// back-projected from training depth maps when `from_depth` is set and the
/// scene has them. Scales follow the mean distance to 3 neighbors.
GaussianSet initialize_gaussians(const SceneDataset& scene, std::size_t count, double opacity, std::uint64_t seed,
                                 bool from_depth = false);

/// Mean PSNR over the held-out cameras, each capped at kPsnrCap. nullopt without held-out views.
std::optional<double> heldout_psnr(const GaussianSet& gaussians, const SceneDataset& scene, const RenderConfig& cfg);

/// Throws ConfigError before any iteration when the config needs normal maps
/// the scene lacks, or when there are fewer than 2 cameras.
TrainResult train(const SceneDataset& scene, const TrainConfig& cfg, const TrainCallback& on_iteration = {});

/// One JSON object per line; PSNR capped at kPsnrCap.
std::string to_json_line(const IterationRecord& record);

}  // namespace sdfsplat
