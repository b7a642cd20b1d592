#pragma once

// Frame sequences, triplet sampling, augmentation and train/eval splitting.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>
#include <torch/torch.h>

#include "aerodepth/geometry.hpp"

namespace aerodepth::data {

struct Frame {
  std::filesystem::path image;
  int64_t index = 0;
  /// Ground-truth depth file; empty when the sequence has none.
  std::filesystem::path depth;
};

struct FrameSequence {
  std::string id;
  std::vector<Frame> frames;
  geometry::CameraIntrinsics intrinsics;
  int offset = 1;

  /// Strictly increasing frame indices and valid intrinsics.
  void validate() const;
};

/// A triplet by position: frames center - offset, center, center + offset of
/// sequence `sequence`.
struct TripletIndex {
  int sequence = 0;
  int center = 0;
  int offset = 1;

  int left() const { return center - offset; }
  int right() const { return center + offset; }
  auto operator<=>(const TripletIndex&) const = default;
};

struct Triplet {
  torch::Tensor left;   ///< [3, H, W] in [0, 1]
  torch::Tensor ref;    ///< [3, H, W]
  torch::Tensor right;  ///< [3, H, W]
  geometry::CameraIntrinsics intrinsics;
  int offset = 1;
  TripletIndex source;
};

/// Every triplet whose frames lie inside the sequence, ordered by centre.
/// Throws InvalidInputError for offset < 1; a sequence shorter than
/// 2 * offset + 1 frames yields no triplets and a warning on stderr.
std::vector<TripletIndex> sample_triplets(const FrameSequence& sequence,
                                          int offset, int sequence_id = 0);

enum class FlipMode { Temporal, Mirror };

struct AugmentationConfig {
  bool enabled = true;
  double flip_probability = 0.5;
  /// Temporal reverses the frame order (left <-> right); Mirror flips every
  /// image horizontally.
  FlipMode flip_mode = FlipMode::Temporal;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;
  double hue = 0.1;  ///< fraction of the hue circle
  /// Zoom factor range for the random crop; 1 keeps the full frame.
  double min_crop_scale = 1.0;
  double max_crop_scale = 1.2;

  void validate() const;
};

/// Applies flip, crop/scale and colour jitter with parameters drawn from
/// `seed`. Colour and geometric changes are identical for the three images;
/// the intrinsics follow the crop.
Triplet augment(const Triplet& triplet, const AugmentationConfig& config,
                uint64_t seed);

struct Split {
  std::vector<TripletIndex> train;
  std::vector<TripletIndex> eval;
  /// Training triplets left out because one of their frames is the centre of
  /// an evaluation triplet.
  std::vector<TripletIndex> guard;
};

/// Holds out round((1 - ratio) * N) triplets for evaluation as one contiguous
/// block of centres per sequence, placed at a seeded random position.
/// With `guard` set, training triplets that contain an evaluation centre frame
/// are moved to Split::guard; otherwise train and eval partition the input.
Split split_train_eval(std::span<const TripletIndex> triplets,
                       double ratio = 0.9, uint64_t seed = 0,
                       bool guard = true);

// --- dataset manifest -------------------------------------------------------

struct SequenceEntry {
  std::string name;
  std::filesystem::path images;
  std::filesystem::path intrinsics;
  int offset = 1;
  std::filesystem::path depth;  ///< optional ground-truth directory

  bool operator==(const SequenceEntry&) const = default;
};

/// Plain-text listing, one sequence per line:
///   sequence name=<id> images=<dir> intrinsics=<file> offset=<n> [depth=<dir>]
/// Relative paths are resolved against the manifest's directory.
struct DatasetManifest {
  std::vector<SequenceEntry> sequences;

  static DatasetManifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Numbered image files (*.png, *.jpg, *.jpeg) of `image_dir` sorted by the
/// integer in their stem; a depth file with the same stem is attached when
/// `depth_dir` is given.
std::vector<Frame> list_frames(const std::filesystem::path& image_dir,
                               const std::filesystem::path& depth_dir = {});

FrameSequence load_sequence(const SequenceEntry& entry,
                            const std::filesystem::path& base_dir = {});

/// Sequences held in memory at the working resolution.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<FrameSequence> sequences, int width, int height);

  static Dataset from_manifest(const std::filesystem::path& manifest, int width,
                               int height);

  int width() const { return width_; }
  int height() const { return height_; }
  size_t num_sequences() const { return sequences_.size(); }
  const FrameSequence& sequence(size_t i) const { return sequences_.at(i); }

  /// Intrinsics of sequence `i` at the working resolution.
  const geometry::CameraIntrinsics& intrinsics(size_t i) const {
    return intrinsics_.at(i);
  }
  const torch::Tensor& image(int sequence, int position) const;

  /// Triplets of every sequence using each sequence's own offset.
  std::vector<TripletIndex> triplets() const;
  Triplet triplet(const TripletIndex& index) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<FrameSequence> sequences_;
  std::vector<geometry::CameraIntrinsics> intrinsics_;
  std::vector<std::vector<torch::Tensor>> images_;
};

/// Seed for one sample, derived from a base seed and two counters.
uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0);

}  // namespace aerodepth::data
