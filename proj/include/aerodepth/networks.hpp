#pragma once

// Depth U-Net and the pose head that reuses its encoder.
//
// The depth network is an encoder/decoder with a skip connection from every
// encoder stage; the decoder upsamples with parameter-free nearest-neighbour
// interpolation followed by convolution and emits a sigmoid map after each of
// its last `num_scales` stages (scale 0 = input resolution). The pose head
// runs the same encoder instance on all three triplet images, concatenates the
// deepest feature maps, applies three learned 3x3/3x3/1x1 layers and averages
// over space to obtain 2 x 6 pose parameters.

#include <array>
#include <memory>
#include <string>
#include <vector>
#include <torch/torch.h>

#include "aerodepth/geometry.hpp"

namespace aerodepth::networks {

enum class EncoderKind { VGG16, ResNet18, DenseNet };

std::string to_string(EncoderKind kind);
/// Accepts "vgg16", "resnet18", "densenet" (case-insensitive).
EncoderKind parse_encoder_kind(const std::string& name);

struct NetworkConfig {
  EncoderKind encoder = EncoderKind::ResNet18;
  int num_scales = 4;
  double min_depth = 0.1;
  double max_depth = 100.0;
  int width = 384;
  int height = 224;
  /// Decoder channels per stage, finest first.
  std::array<int64_t, 5> decoder_widths{24, 48, 96, 192, 384};
  /// Widths of the first two pose layers; the third always emits 12 values.
  std::array<int64_t, 2> pose_widths{256, 256};
  /// Multiplier on the raw pose output.
  double pose_scale = 0.01;

  /// Throws ConfigError when num_scales is outside [1, 5], the depth range is
  /// not 0 < min < max, or either input side is 32 pixels or fewer.
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Feature pyramid extractor: five maps at strides 2, 4, 8, 16, 32.
class EncoderImpl : public torch::nn::Module {
 public:
  ~EncoderImpl() override = default;

  /// image: [B, 3, H, W] in [0, 1]. Feature i has spatial size ceil(H / 2^(i+1)).
  virtual std::vector<torch::Tensor> forward(const torch::Tensor& image) = 0;

  const std::vector<int64_t>& channels() const { return channels_; }
  EncoderKind kind() const { return kind_; }

 protected:
  EncoderImpl(EncoderKind kind, std::vector<int64_t> channels)
      : kind_(kind), channels_(std::move(channels)) {}

 private:
  EncoderKind kind_;
  std::vector<int64_t> channels_;
};

/// Randomly initialised encoder of the requested topology.
std::shared_ptr<EncoderImpl> make_encoder(EncoderKind kind);

class DepthDecoderImpl : public torch::nn::Module {
 public:
  DepthDecoderImpl(const std::vector<int64_t>& encoder_channels, int num_scales,
                   const std::array<int64_t, 5>& widths);

  /// Sigmoid maps, finest first; scale s has size ceil(H / 2^s) x ceil(W / 2^s).
  std::vector<torch::Tensor> forward(const std::vector<torch::Tensor>& features,
                                     int64_t height, int64_t width);

 private:
  int num_scales_;
  std::vector<torch::nn::Sequential> upconv0_;
  std::vector<torch::nn::Sequential> upconv1_;
  std::vector<torch::nn::Conv2d> heads_;
};
TORCH_MODULE(DepthDecoder);

class DepthNetImpl : public torch::nn::Module {
 public:
  explicit DepthNetImpl(const NetworkConfig& config);

  /// Per-scale sigmoid maps in (0, 1), finest first.
  std::vector<torch::Tensor> forward(const torch::Tensor& image);

  std::vector<torch::Tensor> decode(const std::vector<torch::Tensor>& features,
                                    int64_t height, int64_t width);

  const std::shared_ptr<EncoderImpl>& encoder() const { return encoder_; }
  const NetworkConfig& config() const { return config_; }

 private:
  NetworkConfig config_;
  std::shared_ptr<EncoderImpl> encoder_;
  DepthDecoder decoder_{nullptr};
};
TORCH_MODULE(DepthNet);

class PoseHeadImpl : public torch::nn::Module {
 public:
  PoseHeadImpl(int64_t feature_channels, const std::array<int64_t, 2>& widths,
               double output_scale);

  /// Deepest features of (left, ref, right) -> [B, 2, 6]; row 0 maps reference
  /// camera coordinates into the left camera, row 1 into the right camera.
  torch::Tensor forward(const torch::Tensor& left, const torch::Tensor& ref,
                        const torch::Tensor& right);

 private:
  torch::nn::Sequential layers_{nullptr};
  double output_scale_;
};
TORCH_MODULE(PoseHead);

class PoseNetImpl : public torch::nn::Module {
 public:
  PoseNetImpl(const NetworkConfig& config, std::shared_ptr<EncoderImpl> shared);

  /// Runs the shared encoder on the three images; returns [B, 2, 6].
  torch::Tensor forward(const torch::Tensor& left, const torch::Tensor& ref,
                        const torch::Tensor& right);

  const std::shared_ptr<EncoderImpl>& encoder() const { return encoder_; }
  PoseHead& head() { return head_; }
  const PoseHead& head() const { return head_; }

 private:
  std::shared_ptr<EncoderImpl> encoder_;
  PoseHead head_{nullptr};
};
TORCH_MODULE(PoseNet);

DepthNet build_depth_network(const NetworkConfig& config);

/// Pose network on top of `shared_encoder`, which must be the encoder of the
/// depth network built from the same configuration.
PoseNet build_pose_head(const NetworkConfig& config,
                        std::shared_ptr<EncoderImpl> shared_encoder);

/// Depth and pose networks sharing one encoder.
struct DepthPoseModel {
  DepthNet depth{nullptr};
  PoseNet pose{nullptr};

  /// Unique trainable tensors: depth network followed by the pose head.
  std::vector<torch::Tensor> parameters() const;
  void train(bool on = true);
};

DepthPoseModel build_model(const NetworkConfig& config);

/// D = 1 / (a * sigma + b), a = 1/min_depth - 1/max_depth, b = 1/max_depth.
torch::Tensor sigmoid_to_depth(const torch::Tensor& sigmoid,
                               const NetworkConfig& config);

int64_t count_parameters(const torch::nn::Module& module);
int64_t count_depth_parameters(const DepthPoseModel& model);
int64_t count_training_parameters(const DepthPoseModel& model);

/// The two poses of a [2, 6] (or [1, 2, 6]) prediction.
std::array<geometry::PoseSE3, 2> to_poses(const torch::Tensor& prediction);

}  // namespace aerodepth::networks
