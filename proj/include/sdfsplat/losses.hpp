#pragma once

#include "sdfsplat/image.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace sdfsplat {

enum class Stage { Vanilla, Opacity, Regularized, Refinement };

const char* stage_name(Stage stage);
bool stage_uses_entropy(Stage stage);
bool stage_uses_normal_reg(Stage stage);

struct LossWeights {
    double lambda_dssim = 0.2;
    double lambda_r = 0.2;
    /// Strong enough that entropy outweighs photometric pull on semi-transparent Gaussians within a short opacity stage.
    double lambda_entropy = 0.3;

    void validate() const;
};

struct LossReport {
    double total = 0.0;
    double l1 = 0.0;
    double dssim = 0.0;
    double normal_reg = 0.0;
    double entropy = 0.0;
    std::size_t pixels_used = 0;
};

/// Scalar loss with its gradient image (same shape as the differentiated input).
struct ImageLoss {
    double value = 0.0;
    Image grad;
};

struct NormalRegLoss {
    double value = 0.0;
    Image grad;  ///< dL/d grad_map
    std::size_t pixels_used = 0;
};

struct EntropyLoss {
    double value = 0.0;
    std::vector<double> grad;  ///< dL/d alpha
};

/// Pixel-channel mean of |rendered - target|. Subgradient 0 at ties.
ImageLoss l1_loss(const Image& rendered, const Image& target);

/// (1 - SSIM) / 2, gradient with respect to `rendered`.
ImageLoss dssim_loss(const Image& rendered, const Image& target);

/// Mean binary entropy of the opacities.
EntropyLoss entropy_loss(std::span<const double> opacities);

inline constexpr double kNormalRegAlphaMin = 0.5;
inline constexpr double kNormalRegNormFloor = 1e-8;

/// Mean of 1 - |cos(grad_map, normal)| over qualifying pixels. An empty mask
/// selects every pixel; otherwise nonzero mask entries select.
NormalRegLoss normal_reg(const Image& grad_map, const Image& normal_map, const Image& alpha, const Image& mask = {});

/// Weighted sum of the terms active in `stage`; inactive terms are reported as 0.
LossReport total_loss(Stage stage, const LossWeights& weights, double l1, double dssim, double normal_reg,
                      double entropy, std::size_t pixels_used);

}  // namespace sdfsplat
