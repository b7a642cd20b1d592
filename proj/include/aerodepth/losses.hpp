#pragma once

// View-synthesis training objective: SSIM + L1 photometric error, pixel-wise
// minimum over the matching views, mean-normalised edge-aware smoothness, and
// the multi-scale aggregate.

#include <span>
#include <vector>
#include <torch/torch.h>

namespace aerodepth::losses {

/// SSIM stabilisation constants for intensities in [0, 1].
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

struct LossWeights {
  double smoothness = 0.001;  ///< lambda
  double alpha = 0.15;        ///< SSIM share of the photometric error

  /// Throws ConfigError for lambda < 0 or alpha outside [0, 1].
  void validate() const;
};

/// Per-pixel SSIM over 3x3 windows (reflection padded), averaged over
/// channels. a, b: [B, C, H, W] -> [B, 1, H, W].
torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b);

/// alpha * (1 - SSIM) / 2 + (1 - alpha) * |a - b| (channel mean), per pixel.
torch::Tensor photometric_error(const torch::Tensor& a, const torch::Tensor& b,
                                const LossWeights& weights = {});

struct WarpedView {
  torch::Tensor image;  ///< [B, C, H, W]
  torch::Tensor valid;  ///< [B, 1, H, W] bool, or undefined for all-valid
};

/// Per-pixel minimum of the photometric error across views together with the
/// mask of pixels valid in at least one view. Invalid view pixels never win
/// the minimum.
struct MinReprojection {
  torch::Tensor error;  ///< [B, 1, H, W]; zero where no view is valid
  torch::Tensor valid;  ///< [B, 1, H, W] bool
};

MinReprojection min_reprojection_map(const torch::Tensor& reference,
                                     std::span<const WarpedView> warped,
                                     const LossWeights& weights = {});

/// Mean of the per-pixel minimum error over pixels valid in some view.
torch::Tensor min_reprojection_loss(const torch::Tensor& reference,
                                    std::span<const WarpedView> warped,
                                    const LossWeights& weights = {});

/// Edge-aware smoothness of the mean-normalised depth:
/// mean |dx(d / mean d)| exp(-|dx I|) + mean |dy(d / mean d)| exp(-|dy I|),
/// forward differences, image gradients averaged over channels, the mean
/// depth taken per image.
torch::Tensor smoothness_loss(const torch::Tensor& depth,
                              const torch::Tensor& reference);

struct ScaleLoss {
  torch::Tensor photometric;  ///< scalar
  torch::Tensor smoothness;   ///< scalar
};

struct LossBreakdown {
  struct Scale {
    int index = 0;
    double photometric = 0.0;
    double smoothness = 0.0;
  };

  torch::Tensor total;        ///< differentiable scalar
  torch::Tensor photometric;  ///< mean over scales
  torch::Tensor smoothness;   ///< mean over scales
  std::vector<Scale> per_scale;

  double total_value() const;
  double photometric_value() const;
  double smoothness_value() const;
};

/// Mean over scales of L_p + lambda * L_s.
LossBreakdown total_loss(std::span<const ScaleLoss> scales,
                         const LossWeights& weights = {});

}  // namespace aerodepth::losses
