#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "aerodepth/errors.hpp"
#include "aerodepth/networks.hpp"

using namespace aerodepth;
using namespace aerodepth::networks;

namespace {

NetworkConfig small_config(EncoderKind kind = EncoderKind::ResNet18) {
  NetworkConfig c;
  c.encoder = kind;
  c.width = 64;
  c.height = 48;
  return c;
}

}  // namespace

TEST(NetworkConfig, Validation) {
  NetworkConfig c;
  EXPECT_NO_THROW(c.validate());
  c.num_scales = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.num_scales = 6;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.min_depth = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_depth = 0.05;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.width = 16;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.height = 32;
  EXPECT_THROW(c.validate(), ConfigError);
  c.height = 33;
  EXPECT_NO_THROW(c.validate());
}

TEST(NetworkConfig, ParsesEncoderNames) {
  EXPECT_EQ(parse_encoder_kind("ResNet18"), EncoderKind::ResNet18);
  EXPECT_EQ(parse_encoder_kind("vgg16"), EncoderKind::VGG16);
  EXPECT_EQ(parse_encoder_kind("DENSENET"), EncoderKind::DenseNet);
  EXPECT_THROW(parse_encoder_kind("alexnet"), ConfigError);
  for (auto k : {EncoderKind::VGG16, EncoderKind::ResNet18, EncoderKind::DenseNet}) {
    EXPECT_EQ(parse_encoder_kind(to_string(k)), k);
  }
}

TEST(ParameterCount, ResNet18MatchesPublishedSizes) {
  const auto model = build_model(NetworkConfig{});
  const double depth = static_cast<double>(count_depth_parameters(model));
  const double training = static_cast<double>(count_training_parameters(model));
  EXPECT_LT(depth, training);
  EXPECT_LE(std::abs(depth / 17e6 - 1.0), 0.15) << depth;
  EXPECT_LE(std::abs(training / 21e6 - 1.0), 0.15) << training;
  EXPECT_EQ(count_training_parameters(model),
            static_cast<int64_t>([&] {
              int64_t n = 0;
              for (const auto& p : model.parameters()) n += p.numel();
              return n;
            }()));
}

class EveryEncoder : public ::testing::TestWithParam<EncoderKind> {};

TEST_P(EveryEncoder, FeaturePyramidAndScaleShapes) {
  torch::manual_seed(0);
  const auto cfg = small_config(GetParam());
  auto model = build_model(cfg);
  torch::NoGradGuard no_grad;
  const auto image = torch::rand({2, 3, cfg.height, cfg.width});
  const auto features = model.depth->encoder()->forward(image);
  ASSERT_EQ(features.size(), 5u);
  for (size_t i = 0; i < 5; ++i) {
    const int64_t stride = int64_t{2} << i;
    EXPECT_EQ(features[i].size(1), model.depth->encoder()->channels()[i]);
    EXPECT_EQ(features[i].size(2), (cfg.height + stride - 1) / stride);
    EXPECT_EQ(features[i].size(3), (cfg.width + stride - 1) / stride);
  }
  const auto sigmoids = model.depth->forward(image);
  ASSERT_EQ(static_cast<int>(sigmoids.size()), cfg.num_scales);
  for (int s = 0; s < cfg.num_scales; ++s) {
    EXPECT_EQ(sigmoids[s].size(0), 2);
    EXPECT_EQ(sigmoids[s].size(1), 1);
    EXPECT_EQ(sigmoids[s].size(2), (cfg.height + (1 << s) - 1) >> s);
    EXPECT_EQ(sigmoids[s].size(3), (cfg.width + (1 << s) - 1) >> s);
    EXPECT_GT(sigmoids[s].min().item<double>(), 0.0);
    EXPECT_LT(sigmoids[s].max().item<double>(), 1.0);
  }
  const auto poses = model.pose->forward(image, image, image);
  EXPECT_EQ(poses.sizes(), (std::vector<int64_t>{2, 2, 6}));
}

INSTANTIATE_TEST_SUITE_P(Kinds, EveryEncoder,
                         ::testing::Values(EncoderKind::VGG16, EncoderKind::ResNet18,
                                           EncoderKind::DenseNet));

TEST(DepthNet, OddInputSizes) {
  auto cfg = small_config();
  cfg.width = 70;
  cfg.height = 45;
  auto net = build_depth_network(cfg);
  torch::NoGradGuard no_grad;
  const auto out = net->forward(torch::rand({1, 3, 45, 70}));
  EXPECT_EQ(out[0].size(2), 45);
  EXPECT_EQ(out[0].size(3), 70);
  EXPECT_EQ(out[3].size(2), 6);
  EXPECT_EQ(out[3].size(3), 9);
}

TEST(SigmoidToDepth, SpansTheConfiguredRangeMonotonically) {
  NetworkConfig cfg;
  const auto s = torch::linspace(0.0, 1.0, 101, torch::kFloat64);
  const auto d = sigmoid_to_depth(s, cfg);
  EXPECT_NEAR(d[0].item<double>(), 100.0, 1e-9);
  EXPECT_NEAR(d[100].item<double>(), 0.1, 1e-12);
  EXPECT_TRUE((d.slice(0, 1) < d.slice(0, 0, 100)).all().item<bool>());
  for (int i = 0; i <= 100; ++i) {
    const double sigma = i / 100.0;
    EXPECT_NEAR(d[i].item<double>(), 1.0 / ((10.0 - 0.01) * sigma + 0.01), 1e-9);
  }
}

TEST(PoseNet, SharesTheEncoderStorage) {
  auto model = build_model(small_config());
  EXPECT_EQ(model.depth->encoder().get(), model.pose->encoder().get());
  const auto depth_params = model.depth->encoder()->parameters();
  const auto pose_params = model.pose->encoder()->parameters();
  ASSERT_EQ(depth_params.size(), pose_params.size());
  for (size_t i = 0; i < depth_params.size(); ++i) {
    EXPECT_EQ(depth_params[i].data_ptr(), pose_params[i].data_ptr());
  }

  model.train(false);
  torch::NoGradGuard no_grad;
  const auto image = torch::rand({1, 3, 48, 64});
  const auto before = model.pose->encoder()->forward(image).back().clone();
  depth_params.front().add_(0.5);
  const auto after = model.pose->encoder()->forward(image).back();
  EXPECT_GT((after - before).abs().max().item<double>(), 0.0);
}

TEST(PoseNet, StartsAtIdentity) {
  auto model = build_model(small_config());
  torch::NoGradGuard no_grad;
  const auto a = torch::rand({2, 3, 48, 64});
  const auto poses = model.pose->forward(a, torch::rand_like(a), torch::rand_like(a));
  EXPECT_EQ(poses.abs().max().item<double>(), 0.0);
  const auto pair = to_poses(poses[0]);
  EXPECT_EQ(pair[0].rotation_angle(), 0.0);
}

TEST(PoseNet, UniqueParametersExcludeTheSharedEncoderTwice) {
  auto model = build_model(small_config());
  const auto params = model.parameters();
  std::set<const void*> seen;
  for (const auto& p : params) EXPECT_TRUE(seen.insert(p.unsafeGetTensorImpl()).second);
  EXPECT_EQ(params.size(),
            model.depth->parameters().size() + model.pose->head()->parameters().size());
}

TEST(ToPoses, RejectsWrongShape) {
  EXPECT_THROW(to_poses(torch::zeros({3, 6})), ShapeError);
  EXPECT_NO_THROW(to_poses(torch::zeros({1, 2, 6})));
}
