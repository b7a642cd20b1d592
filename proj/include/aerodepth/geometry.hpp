#pragma once

// Pinhole camera geometry and differentiable inverse warping.
//
// Conventions used throughout:
//  * camera frame: x right, y down, z along the optical axis;
//  * pixel (u, v) addresses the centre of the pixel in column u, row v, so the
//    valid sampling domain of a W x H image is [0, W-1] x [0, H-1];
//  * images are float tensors laid out as [B, C, H, W], depth maps as
//    [B, 1, H, W] and poses as [B, 6] = (axis-angle rotation, translation).

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <iosfwd>
#include <torch/torch.h>

namespace aerodepth::geometry {

/// Depths at or below this value are clamped before the perspective divide and
/// the corresponding pixels are marked invalid.
inline constexpr double kMinProjectionDepth = 1e-3;

/// Below this rotation angle (radians) the Rodrigues terms use a Taylor series.
inline constexpr double kSmallAngle = 1e-7;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 2;
  int height = 2;

  /// Throws InvalidInputError unless fx, fy > 0, all values finite and the
  /// image is at least 2 x 2.
  void validate() const;

  /// Multiplies focal lengths, principal point and image size by `factor`.
  CameraIntrinsics scaled(double factor) const;

  /// Intrinsics of the image obtained by resampling the crop window
  /// [x0, x0 + crop_width) x [y0, y0 + crop_height) to `width` x `height`
  /// pixels with pixel-centre aligned (half-pixel) resampling.
  CameraIntrinsics cropped_and_resized(double x0, double y0, double crop_width,
                                       double crop_height, int width,
                                       int height) const;

  /// Full-frame resize with half-pixel alignment.
  CameraIntrinsics resized(int width, int height) const;

  /// (fx, fy, cx, cy) as a 1-D tensor.
  torch::Tensor to_tensor(torch::TensorOptions options = torch::kFloat32) const;

  /// Pixel coordinates of a camera-frame point; requires z > 0.
  Eigen::Vector2d project(const Eigen::Vector3d& point) const;

  Eigen::Matrix3d matrix() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

/// Reads the plain-text key/value intrinsics format:
///   fx = 150.0
///   fy = 150.0
///   cx = 95.5
///   cy = 47.5
///   width = 192
///   height = 96
/// Blank lines and lines starting with '#' are ignored.
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
CameraIntrinsics parse_intrinsics(std::istream& in);
void write_intrinsics(const std::filesystem::path& path,
                      const CameraIntrinsics& intrinsics);

/// Rigid transform parameterised by an axis-angle rotation vector (radians
/// times unit axis) and a translation. Applied as x' = R x + t.
struct PoseSE3 {
  std::array<double, 3> rotation{0.0, 0.0, 0.0};
  std::array<double, 3> translation{0.0, 0.0, 0.0};

  static PoseSE3 identity() { return {}; }
  static PoseSE3 from_matrix(const Eigen::Matrix4d& transform);
  static PoseSE3 from_tensor(const torch::Tensor& six);

  Eigen::Matrix3d rotation_matrix() const;
  Eigen::Matrix4d matrix() const;
  PoseSE3 inverse() const;
  /// `this` applied after `first`.
  PoseSE3 compose(const PoseSE3& first) const;
  double rotation_angle() const;
  torch::Tensor to_tensor(torch::TensorOptions options = torch::kFloat32) const;
};

/// Scalar Rodrigues map. Throws InvalidInputError on non-finite parameters.
Eigen::Matrix4d pose_to_matrix(const PoseSE3& pose);

/// Batched, differentiable Rodrigues map: [B, 6] -> [B, 4, 4].
torch::Tensor pose_to_matrix(const torch::Tensor& poses);

/// Lifts every pixel to camera coordinates: depth(u,v) * K^-1 (u, v, 1).
/// depth: [B, 1, H, W]; intrinsics: [4] or [B, 4]. Returns [B, 3, H, W].
torch::Tensor backproject(const torch::Tensor& depth,
                          const torch::Tensor& intrinsics);

/// Same as above but also checks that the depth map has the image size
/// recorded in `intrinsics`.
torch::Tensor backproject(const torch::Tensor& depth,
                          const CameraIntrinsics& intrinsics);

/// Continuous source-image coordinates for every target pixel.
struct SampleGrid {
  torch::Tensor coords;  ///< [B, H, W, 2] pixel coordinates (u, v)
  torch::Tensor valid;   ///< [B, 1, H, W] bool
};

/// Transforms points by `transform` ([B, 4, 4] or [4, 4]) and projects them
/// with `intrinsics` into a source image of `width` x `height` pixels.
/// Points with transformed depth <= kMinProjectionDepth get coordinates (0, 0)
/// and are invalid, as are points landing outside the source image.
SampleGrid project(const torch::Tensor& points, const torch::Tensor& transform,
                   const torch::Tensor& intrinsics, int64_t width,
                   int64_t height);

SampleGrid project(const torch::Tensor& points, const PoseSE3& pose,
                   const CameraIntrinsics& intrinsics);

struct SampledImage {
  torch::Tensor image;  ///< [B, C, H, W]; zero where invalid
  torch::Tensor valid;  ///< [B, 1, H, W] bool
};

/// Bilinear interpolation of `source` at `grid.coords`. Differentiable with
/// respect to the source intensities and the coordinates.
SampledImage bilinear_sample(const torch::Tensor& source,
                             const SampleGrid& grid);

/// Inverse warp of a source view into the reference view:
/// source[proj(depth, pose, K)]. `poses` is [B, 6] mapping reference-camera
/// coordinates to source-camera coordinates. The depth map must already have
/// the source image resolution.
SampledImage project_and_sample(const torch::Tensor& source,
                                const torch::Tensor& depth,
                                const torch::Tensor& poses,
                                const torch::Tensor& intrinsics);

SampledImage project_and_sample(const torch::Tensor& source,
                                const torch::Tensor& depth,
                                const PoseSE3& pose,
                                const CameraIntrinsics& intrinsics);

/// Bilinear (half-pixel aligned) resize of a [B, C, h, w] map to H x W.
torch::Tensor upsample_to(const torch::Tensor& map, int64_t height,
                          int64_t width);

/// Pixel grid [B, H, W, 2] holding (u, v) at every pixel.
torch::Tensor pixel_grid(int64_t batch, int64_t height, int64_t width,
                         torch::TensorOptions options = torch::kFloat32);

}  // namespace aerodepth::geometry
