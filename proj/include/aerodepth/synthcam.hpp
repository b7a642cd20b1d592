#pragma once

// Deterministic synthetic aerial scenes: a textured ground plane with
// axis-aligned boxes, ray cast from a pinhole camera moving along a
// parametric path. Every frame comes with its exact z-depth map and exact
// camera pose, so warping with the ground truth reproduces the reference view
// up to interpolation error on non-occluded pixels.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>
#include <torch/torch.h>

#include "aerodepth/config.hpp"
#include "aerodepth/data.hpp"
#include "aerodepth/geometry.hpp"

namespace aerodepth::synthcam {

enum class TrajectoryKind { Orbit, Lateral, Forward };

std::string to_string(TrajectoryKind kind);
TrajectoryKind parse_trajectory(const std::string& name);

/// Axis-aligned box standing on the ground plane (z = 0).
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;
  double height = 1.0;
};

struct SceneSpec {
  std::string name = "scene";
  std::vector<Box> boxes;
  uint64_t texture_seed = 1;
  /// Lattice spacing (scene units) of the coarsest texture octave.
  double texture_scale = 2.4;
  int texture_octaves = 3;

  TrajectoryKind trajectory = TrajectoryKind::Lateral;
  /// Distance travelled per frame in scene units (arc length for orbits).
  double speed = 1.0;
  /// Camera height above the ground plane.
  double altitude = 30.0;
  /// Pitch of the optical axis away from nadir, degrees.
  double tilt_deg = 30.0;
  /// Viewing direction in the ground plane, degrees from +x.
  double heading_deg = 0.0;
  /// Start position (lateral/forward) or orbit centre, ground coordinates.
  std::array<double, 2> origin{0.0, 0.0};
  double orbit_radius = 30.0;

  geometry::CameraIntrinsics intrinsics{153.6, 153.6, 95.5, 47.5, 192, 96};
  int frame_count = 10;
  /// Frame spacing used when the sequence is written as a training set.
  int offset = 1;

  /// Standard deviation of additive Gaussian sensor noise, intensity units.
  double noise = 0.0;
  uint64_t noise_seed = 7;
  /// Global lighting gain of the sequence.
  double brightness = 1.0;
  std::array<double, 3> light_direction{0.3, 0.5, 0.8};

  /// Rendered depths must stay strictly inside this range.
  double min_depth = 0.1;
  double max_depth = 100.0;

  /// Throws SceneError for non-positive sizes, boxes with zero extent, or
  /// camera positions below the ground or inside a box.
  void validate() const;
};

struct RenderedSequence {
  std::string name;
  std::vector<torch::Tensor> images;  ///< [3, H, W] in [0, 1]
  std::vector<torch::Tensor> depths;  ///< [H, W] float32 z-depth
  std::vector<geometry::PoseSE3> camera_to_world;
  geometry::CameraIntrinsics intrinsics;
};

/// Camera-to-world pose of frame `index`.
geometry::PoseSE3 camera_pose(const SceneSpec& spec, int index);

/// Renders every frame. Throws SceneError if the camera enters geometry, a ray
/// misses the scene, or a depth falls outside (min_depth, max_depth).
RenderedSequence render_sequence(const SceneSpec& spec);

/// Renders a single frame: image [3, H, W] and depth [H, W].
std::pair<torch::Tensor, torch::Tensor> render_frame(const SceneSpec& spec,
                                                     const geometry::PoseSE3& camera_to_world);

/// Transform mapping reference-camera coordinates into camera k coordinates.
geometry::PoseSE3 relative_pose(const geometry::PoseSE3& ref_to_world,
                                const geometry::PoseSE3& k_to_world);

/// Reference pixels whose surface point is visible in view k: the point
/// projects inside view k and its depth agrees with view k's depth map within
/// `relative_tolerance`. Depths are [H, W]; returns [H, W] bool.
torch::Tensor visibility_mask(const torch::Tensor& ref_depth,
                              const torch::Tensor& k_depth,
                              const geometry::PoseSE3& ref_to_k,
                              const geometry::CameraIntrinsics& intrinsics,
                              double relative_tolerance = 0.01);

/// Random city-block layout: `count` boxes inside [-extent, extent]^2 with
/// side lengths in [min_side, max_side] and heights in [min_height,
/// max_height]. Boxes may overlap.
std::vector<Box> random_boxes(uint64_t seed, int count, double extent,
                              double min_side, double max_side,
                              double min_height, double max_height);

/// Writes every spec as a sequence directory under `out_dir`:
///   <name>/images/000000.png ...   8-bit RGB frames
///   <name>/depth/000000.depth ...  ground-truth depth grids
///   <name>/intrinsics.txt
///   <name>/poses.txt               frame index + 3x4 camera-to-world rows
/// plus `out_dir/manifest.txt` listing all sequences.
data::DatasetManifest make_benchmark(std::span<const SceneSpec> specs,
                                     const std::filesystem::path& out_dir);

/// Named scene collections:
///   "demo"  - one short lateral sequence;
///   "desk"  - four trajectories over one town (training benchmark);
///   "A"     - mid-rise town, straight flight;
///   "B"     - a denser, taller neighbouring town, orbit;
///   "AB"    - A followed by B.
std::vector<SceneSpec> preset(const std::string& name, int width, int height,
                              int frames_per_sequence);

/// Scene description from a key/value config ([scene] section), starting
/// from `base`. Boxes are given either explicitly (scene.boxes =
/// x0,y0,x1,y1,h;...) or generated (scene.random_boxes = count, ...).
SceneSpec scene_from_config(const config::KeyValueConfig& cfg, SceneSpec base = {});

}  // namespace aerodepth::synthcam
