#pragma once

// Depth accuracy metrics against ground truth: RMSE, L1-rel and the
// delta-threshold accuracy, after resizing and median scaling.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>
#include <torch/torch.h>

namespace aerodepth::evaluation {

inline constexpr std::array<double, 3> kDeltaThresholds{1.25, 1.15, 1.05};

/// Ground truth beyond this depth is treated as invalid when loaded.
inline constexpr double kMaxGroundTruthDepth = 100.0;

/// Depth units per count in 16-bit PNG ground truth (value = depth * 256).
inline constexpr double kPng16Scale = 256.0;

struct EvalReport {
  double rmse = 0.0;
  double l1_rel = 0.0;
  /// Accuracy for kDeltaThresholds, in the same order.
  std::array<double, 3> delta{0.0, 0.0, 0.0};
  int64_t valid_pixels = 0;
  double scale_ratio = 1.0;

  double delta_at(double threshold) const;
};

struct ScaledDepth {
  torch::Tensor depth;
  double ratio = 1.0;
};

/// Median of `values` (mean of the two middle elements for even counts).
double median(std::vector<double> values);

/// Multiplies `prediction` by median(gt) / median(prediction), both medians
/// taken over pixels where `valid` is set. All inputs are [H, W].
ScaledDepth median_scale(const torch::Tensor& prediction,
                         const torch::Tensor& ground_truth,
                         const torch::Tensor& valid);

/// Bilinear resize of an [H, W] depth map.
torch::Tensor align_resize(const torch::Tensor& prediction, int64_t height,
                           int64_t width);

/// Metrics over pixels where `valid` is set. Inputs are [H, W].
EvalReport compute_metrics(const torch::Tensor& prediction,
                           const torch::Tensor& ground_truth,
                           const torch::Tensor& valid);

/// align_resize + median_scale + compute_metrics.
EvalReport evaluate(const torch::Tensor& prediction,
                    const torch::Tensor& ground_truth,
                    const torch::Tensor& valid);

/// Arithmetic mean of per-image reports.
EvalReport mean_report(std::span<const EvalReport> reports);

struct GroundTruth {
  torch::Tensor depth;  ///< [H, W] float64
  torch::Tensor valid;  ///< [H, W] bool
};

/// Binary depth grid with a text header:
///   AERODEPTH-DEPTH 1\n width <W>\n height <H>\n units <name>\n end\n
/// followed by W * H little-endian float32 values in row-major order.
void write_depth_file(const std::filesystem::path& path,
                      const torch::Tensor& depth,
                      const std::string& units = "scene");
torch::Tensor read_depth_file(const std::filesystem::path& path);

/// Loads a .depth grid or a 16-bit PNG (value / kPng16Scale, 0 = missing) as
/// ground truth. Non-finite, non-positive and > kMaxGroundTruthDepth values
/// are invalid.
GroundTruth load_ground_truth(const std::filesystem::path& path);

struct ReportRow {
  std::string name;
  EvalReport report;
};

/// CSV with columns name,rmse,l1_rel,delta_1.25,delta_1.05.
void write_report_csv(const std::filesystem::path& path,
                      std::span<const ReportRow> rows);

}  // namespace aerodepth::evaluation
