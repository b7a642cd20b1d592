#include "aerodepth/networks.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "aerodepth/errors.hpp"

namespace aerodepth::networks {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

constexpr double kImageMean = 0.45;
constexpr double kImageStd = 0.225;

nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1,
                int64_t padding = 0, bool bias = false) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel)
                        .stride(stride)
                        .padding(padding)
                        .bias(bias));
}

void init_encoder_weights(nn::Module& module) {
  torch::NoGradGuard no_grad;
  for (auto& m : module.modules(/*include_self=*/false)) {
    if (auto* c = m->as<nn::Conv2d>()) {
      nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanOut, torch::kReLU);
      if (c->bias.defined()) nn::init::zeros_(c->bias);
    } else if (auto* bn = m->as<nn::BatchNorm2d>()) {
      nn::init::ones_(bn->weight);
      nn::init::zeros_(bn->bias);
    }
  }
}

// --- ResNet18 ---------------------------------------------------------------

class BasicBlockImpl : public nn::Module {
 public:
  BasicBlockImpl(int64_t in, int64_t out, int64_t stride)
      : conv1_(register_module("conv1", conv(in, out, 3, stride, 1))),
        bn1_(register_module("bn1", nn::BatchNorm2d(out))),
        conv2_(register_module("conv2", conv(out, out, 3, 1, 1))),
        bn2_(register_module("bn2", nn::BatchNorm2d(out))) {
    if (stride != 1 || in != out) {
      downsample_ = register_module(
          "downsample", nn::Sequential(conv(in, out, 1, stride), nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(bn1_(conv1_(x)));
    y = bn2_(conv2_(y));
    const auto skip = downsample_ ? downsample_->forward(x) : x;
    return torch::relu(y + skip);
  }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm2d bn2_;
  nn::Sequential downsample_{nullptr};
};
TORCH_MODULE(BasicBlock);

class ResNet18Encoder : public EncoderImpl {
 public:
  ResNet18Encoder() : EncoderImpl(EncoderKind::ResNet18, {64, 64, 128, 256, 512}) {
    conv1_ = register_module("conv1", conv(3, 64, 7, 2, 3));
    bn1_ = register_module("bn1", nn::BatchNorm2d(64));
    const int64_t widths[] = {64, 128, 256, 512};
    int64_t in = 64;
    for (int i = 0; i < 4; ++i) {
      const int64_t stride = i == 0 ? 1 : 2;
      nn::Sequential layer(BasicBlock(in, widths[i], stride),
                           BasicBlock(widths[i], widths[i], 1));
      layers_.push_back(register_module("layer" + std::to_string(i + 1), layer));
      in = widths[i];
    }
    init_encoder_weights(*this);
  }

  std::vector<torch::Tensor> forward(const torch::Tensor& image) override {
    std::vector<torch::Tensor> features;
    auto x = (image - kImageMean) / kImageStd;
    x = torch::relu(bn1_(conv1_(x)));
    features.push_back(x);
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
    for (auto& layer : layers_) {
      x = layer->forward(x);
      features.push_back(x);
    }
    return features;
  }

 private:
  nn::Conv2d conv1_{nullptr};
  nn::BatchNorm2d bn1_{nullptr};
  std::vector<nn::Sequential> layers_;
};

// --- VGG16 (batch-normalised) ----------------------------------------------

class Vgg16Encoder : public EncoderImpl {
 public:
  Vgg16Encoder() : EncoderImpl(EncoderKind::VGG16, {64, 128, 256, 512, 512}) {
    const std::vector<std::vector<int64_t>> blocks = {
        {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
    int64_t in = 3;
    for (size_t b = 0; b < blocks.size(); ++b) {
      nn::Sequential block;
      for (int64_t out : blocks[b]) {
        block->push_back(conv(in, out, 3, 1, 1));
        block->push_back(nn::BatchNorm2d(out));
        block->push_back(nn::ReLU(nn::ReLUOptions(true)));
        in = out;
      }
      blocks_.push_back(register_module("block" + std::to_string(b + 1), block));
    }
    init_encoder_weights(*this);
  }

  std::vector<torch::Tensor> forward(const torch::Tensor& image) override {
    std::vector<torch::Tensor> features;
    auto x = (image - kImageMean) / kImageStd;
    for (auto& block : blocks_) {
      x = block->forward(x);
      x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2).ceil_mode(true));
      features.push_back(x);
    }
    return features;
  }

 private:
  std::vector<nn::Sequential> blocks_;
};

// --- DenseNet-121 -----------------------------------------------------------

class DenseLayerImpl : public nn::Module {
 public:
  DenseLayerImpl(int64_t in, int64_t growth, int64_t bottleneck)
      : norm1_(register_module("norm1", nn::BatchNorm2d(in))),
        conv1_(register_module("conv1", conv(in, bottleneck * growth, 1))),
        norm2_(register_module("norm2", nn::BatchNorm2d(bottleneck * growth))),
        conv2_(register_module("conv2", conv(bottleneck * growth, growth, 3, 1, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = conv1_(torch::relu(norm1_(x)));
    y = conv2_(torch::relu(norm2_(y)));
    return torch::cat({x, y}, 1);
  }

 private:
  nn::BatchNorm2d norm1_;
  nn::Conv2d conv1_;
  nn::BatchNorm2d norm2_;
  nn::Conv2d conv2_;
};
TORCH_MODULE(DenseLayer);

class TransitionImpl : public nn::Module {
 public:
  TransitionImpl(int64_t in, int64_t out)
      : norm_(register_module("norm", nn::BatchNorm2d(in))),
        conv_(register_module("conv", conv(in, out, 1))) {}

  torch::Tensor forward(const torch::Tensor& x) {
    return F::avg_pool2d(conv_(torch::relu(norm_(x))),
                         F::AvgPool2dFuncOptions(2).stride(2).ceil_mode(true));
  }

 private:
  nn::BatchNorm2d norm_;
  nn::Conv2d conv_;
};
TORCH_MODULE(Transition);

class DenseNetEncoder : public EncoderImpl {
 public:
  DenseNetEncoder() : EncoderImpl(EncoderKind::DenseNet, {64, 256, 512, 1024, 1024}) {
    constexpr int64_t kGrowth = 32;
    constexpr int64_t kBottleneck = 4;
    const int layers_per_block[] = {6, 12, 24, 16};
    conv0_ = register_module("conv0", conv(3, 64, 7, 2, 3));
    norm0_ = register_module("norm0", nn::BatchNorm2d(64));
    int64_t channels = 64;
    for (int b = 0; b < 4; ++b) {
      nn::Sequential block;
      for (int l = 0; l < layers_per_block[b]; ++l) {
        block->push_back(DenseLayer(channels, kGrowth, kBottleneck));
        channels += kGrowth;
      }
      blocks_.push_back(register_module("denseblock" + std::to_string(b + 1), block));
      if (b < 3) {
        transitions_.push_back(register_module("transition" + std::to_string(b + 1),
                                               Transition(channels, channels / 2)));
        channels /= 2;
      }
    }
    norm5_ = register_module("norm5", nn::BatchNorm2d(channels));
    init_encoder_weights(*this);
  }

  std::vector<torch::Tensor> forward(const torch::Tensor& image) override {
    std::vector<torch::Tensor> features;
    auto x = (image - kImageMean) / kImageStd;
    x = torch::relu(norm0_(conv0_(x)));
    features.push_back(x);
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2).padding(1));
    for (size_t b = 0; b < blocks_.size(); ++b) {
      x = blocks_[b]->forward(x);
      if (b + 1 < blocks_.size()) {
        features.push_back(x);
        x = transitions_[b]->forward(x);
      }
    }
    features.push_back(torch::relu(norm5_(x)));
    return features;
  }

 private:
  nn::Conv2d conv0_{nullptr};
  nn::BatchNorm2d norm0_{nullptr};
  std::vector<nn::Sequential> blocks_;
  std::vector<Transition> transitions_;
  nn::BatchNorm2d norm5_{nullptr};
};

// 3x3 reflection-padded convolution followed by ELU.
nn::Sequential conv_block(int64_t in, int64_t out) {
  return nn::Sequential(
      nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1).padding_mode(torch::kReflect)),
      nn::ELU());
}

}  // namespace

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::VGG16:
      return "vgg16";
    case EncoderKind::ResNet18:
      return "resnet18";
    case EncoderKind::DenseNet:
      return "densenet";
  }
  return "unknown";
}

EncoderKind parse_encoder_kind(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "vgg16") return EncoderKind::VGG16;
  if (lower == "resnet18") return EncoderKind::ResNet18;
  if (lower == "densenet" || lower == "densenet121") return EncoderKind::DenseNet;
  throw ConfigError("unsupported encoder kind '" + name +
                    "' (expected vgg16, resnet18 or densenet)");
}

void NetworkConfig::validate() const {
  if (num_scales < 1 || num_scales > 5) {
    throw ConfigError("num_scales must lie in [1, 5]");
  }
  if (!(min_depth > 0.0) || !(max_depth > min_depth)) {
    throw ConfigError("depth range must satisfy 0 < min_depth < max_depth");
  }
  if (width <= 32 || height <= 32) {
    throw ConfigError("network input must be larger than 32 pixels on each side");
  }
  for (auto w : decoder_widths) {
    if (w < 1) throw ConfigError("decoder widths must be positive");
  }
  for (auto w : pose_widths) {
    if (w < 1) throw ConfigError("pose widths must be positive");
  }
  if (!(pose_scale > 0.0)) throw ConfigError("pose_scale must be positive");
}

std::shared_ptr<EncoderImpl> make_encoder(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::VGG16:
      return std::make_shared<Vgg16Encoder>();
    case EncoderKind::ResNet18:
      return std::make_shared<ResNet18Encoder>();
    case EncoderKind::DenseNet:
      return std::make_shared<DenseNetEncoder>();
  }
  throw ConfigError("unsupported encoder kind");
}

// ---------------------------------------------------------------------------

DepthDecoderImpl::DepthDecoderImpl(const std::vector<int64_t>& encoder_channels,
                                   int num_scales,
                                   const std::array<int64_t, 5>& widths)
    : num_scales_(num_scales) {
  if (encoder_channels.size() != 5) {
    throw ConfigError("decoder expects five encoder stages");
  }
  upconv0_.resize(5, nullptr);
  upconv1_.resize(5, nullptr);
  for (int i = 4; i >= 0; --i) {
    const int64_t in0 = i == 4 ? encoder_channels[4] : widths[i + 1];
    upconv0_[i] = register_module("upconv" + std::to_string(i) + "_0",
                                  conv_block(in0, widths[i]));
    const int64_t in1 = widths[i] + (i > 0 ? encoder_channels[i - 1] : 0);
    upconv1_[i] = register_module("upconv" + std::to_string(i) + "_1",
                                  conv_block(in1, widths[i]));
  }
  for (int s = 0; s < num_scales; ++s) {
    heads_.push_back(register_module(
        "dispconv" + std::to_string(s),
        nn::Conv2d(nn::Conv2dOptions(widths[s], 1, 3).padding(1).padding_mode(
            torch::kReflect))));
  }
}

std::vector<torch::Tensor> DepthDecoderImpl::forward(
    const std::vector<torch::Tensor>& features, int64_t height, int64_t width) {
  std::vector<torch::Tensor> outputs(num_scales_);
  auto x = features.at(4);
  for (int i = 4; i >= 0; --i) {
    x = upconv0_[i]->forward(x);
    const int64_t th = i > 0 ? features[i - 1].size(2) : height;
    const int64_t tw = i > 0 ? features[i - 1].size(3) : width;
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{th, tw})
                              .mode(torch::kNearest));
    if (i > 0) x = torch::cat({x, features[i - 1]}, 1);
    x = upconv1_[i]->forward(x);
    if (i < num_scales_) outputs[i] = torch::sigmoid(heads_[i](x));
  }
  return outputs;
}

DepthNetImpl::DepthNetImpl(const NetworkConfig& config) : config_(config) {
  config_.validate();
  encoder_ = register_module("encoder", make_encoder(config_.encoder));
  decoder_ = register_module(
      "decoder", DepthDecoder(encoder_->channels(), config_.num_scales,
                              config_.decoder_widths));
}

std::vector<torch::Tensor> DepthNetImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw ShapeError("depth network input must be [B, 3, H, W]");
  }
  return decode(encoder_->forward(image), image.size(2), image.size(3));
}

std::vector<torch::Tensor> DepthNetImpl::decode(
    const std::vector<torch::Tensor>& features, int64_t height, int64_t width) {
  return decoder_->forward(features, height, width);
}

PoseHeadImpl::PoseHeadImpl(int64_t feature_channels,
                           const std::array<int64_t, 2>& widths,
                           double output_scale)
    : output_scale_(output_scale) {
  auto last = nn::Conv2d(nn::Conv2dOptions(widths[1], 12, 1));
  {
    torch::NoGradGuard no_grad;
    last->weight.zero_();
    last->bias.zero_();
  }
  layers_ = register_module(
      "layers",
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3 * feature_channels, widths[0], 3).padding(1)),
                     nn::ReLU(), nn::Conv2d(nn::Conv2dOptions(widths[0], widths[1], 3).padding(1)),
                     nn::ReLU(), last));
}

torch::Tensor PoseHeadImpl::forward(const torch::Tensor& left,
                                    const torch::Tensor& ref,
                                    const torch::Tensor& right) {
  const auto x = layers_->forward(torch::cat({left, ref, right}, 1));
  return output_scale_ * x.mean({2, 3}).view({-1, 2, 6});
}

PoseNetImpl::PoseNetImpl(const NetworkConfig& config,
                         std::shared_ptr<EncoderImpl> shared)
    : encoder_(std::move(shared)) {
  if (!encoder_) throw ConfigError("pose network needs the depth encoder");
  if (encoder_->kind() != config.encoder) {
    throw ConfigError("pose head configured for " + to_string(config.encoder) +
                      " but shared encoder is " + to_string(encoder_->kind()));
  }
  register_module("encoder", encoder_);
  head_ = register_module(
      "head", PoseHead(encoder_->channels().back(), config.pose_widths, config.pose_scale));
}

torch::Tensor PoseNetImpl::forward(const torch::Tensor& left,
                                   const torch::Tensor& ref,
                                   const torch::Tensor& right) {
  const auto batch = ref.size(0);
  const auto deep = encoder_->forward(torch::cat({left, ref, right}, 0)).back();
  const auto parts = deep.split(batch, 0);
  return head_->forward(parts[0], parts[1], parts[2]);
}

DepthNet build_depth_network(const NetworkConfig& config) { return DepthNet(config); }

PoseNet build_pose_head(const NetworkConfig& config,
                        std::shared_ptr<EncoderImpl> shared_encoder) {
  return PoseNet(config, std::move(shared_encoder));
}

std::vector<torch::Tensor> DepthPoseModel::parameters() const {
  auto params = depth->parameters();
  for (const auto& p : pose->head()->parameters()) params.push_back(p);
  return params;
}

void DepthPoseModel::train(bool on) {
  depth->train(on);
  pose->train(on);
}

DepthPoseModel build_model(const NetworkConfig& config) {
  DepthPoseModel model;
  model.depth = build_depth_network(config);
  model.pose = build_pose_head(config, model.depth->encoder());
  return model;
}

torch::Tensor sigmoid_to_depth(const torch::Tensor& sigmoid,
                               const NetworkConfig& config) {
  const double a = 1.0 / config.min_depth - 1.0 / config.max_depth;
  const double b = 1.0 / config.max_depth;
  return 1.0 / (a * sigmoid + b);
}

int64_t count_parameters(const nn::Module& module) {
  std::unordered_set<const void*> seen;
  int64_t total = 0;
  for (const auto& p : module.parameters()) {
    if (seen.insert(p.unsafeGetTensorImpl()).second) total += p.numel();
  }
  return total;
}

int64_t count_depth_parameters(const DepthPoseModel& model) {
  return count_parameters(*model.depth);
}

int64_t count_training_parameters(const DepthPoseModel& model) {
  return count_parameters(*model.depth) + count_parameters(*model.pose->head());
}

std::array<geometry::PoseSE3, 2> to_poses(const torch::Tensor& prediction) {
  const auto p = prediction.detach().reshape({-1, 6});
  if (p.size(0) != 2) throw ShapeError("pose prediction must hold 2 x 6 values");
  return {geometry::PoseSE3::from_tensor(p[0]), geometry::PoseSE3::from_tensor(p[1])};
}

}  // namespace aerodepth::networks
