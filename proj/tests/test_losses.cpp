#include <gtest/gtest.h>

#include <limits>

#include "aerodepth/errors.hpp"
#include "aerodepth/losses.hpp"
#include "support/oracles.hpp"

using namespace aerodepth;
using namespace aerodepth::losses;

TEST(LossWeights, DefaultsAndValidation) {
  LossWeights w;
  EXPECT_DOUBLE_EQ(w.smoothness, 0.001);
  EXPECT_DOUBLE_EQ(w.alpha, 0.15);
  w.alpha = 1.5;
  EXPECT_THROW(w.validate(), ConfigError);
  w = {};
  w.smoothness = -1.0;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Ssim, MatchesWindowedOracle) {
  torch::manual_seed(0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = torch::rand({1, 3, 7, 9}, torch::kFloat64);
    const auto b = (a + 0.2 * torch::randn_like(a)).clamp(0, 1);
    const auto got = ssim(a, b)[0][0];
    const auto expected = oracle::ssim(a[0], b[0]);
    EXPECT_LT((got - expected).abs().max().item<double>(), 1e-12);
  }
}

TEST(Ssim, IdenticalImagesScoreOne) {
  const auto a = torch::rand({2, 3, 6, 6}, torch::kFloat64);
  EXPECT_LT((ssim(a, a) - 1.0).abs().max().item<double>(), 1e-12);
}

TEST(Ssim, RejectsMismatchedShapes) {
  EXPECT_THROW(ssim(torch::rand({1, 3, 4, 4}), torch::rand({1, 3, 4, 5})), ShapeError);
}

TEST(Photometric, MatchesOracleForSeveralAlphas) {
  const auto a = torch::rand({1, 3, 6, 8}, torch::kFloat64);
  const auto b = torch::rand({1, 3, 6, 8}, torch::kFloat64);
  for (double alpha : {0.0, 0.15, 0.85, 1.0}) {
    LossWeights w;
    w.alpha = alpha;
    const auto got = photometric_error(a, b, w)[0][0];
    EXPECT_LT((got - oracle::photometric(a[0], b[0], alpha)).abs().max().item<double>(), 1e-12);
  }
}

TEST(Photometric, ZeroForIdenticalImagesAndNonNegative) {
  const auto a = torch::rand({2, 3, 5, 5}, torch::kFloat64);
  EXPECT_LT(photometric_error(a, a).abs().max().item<double>(), 1e-12);
  const auto b = torch::rand({2, 3, 5, 5}, torch::kFloat64);
  EXPECT_GE(photometric_error(a, b).min().item<double>(), 0.0);
}

TEST(MinReprojection, PicksPerPixelMinimumOverValidViews) {
  torch::manual_seed(1);
  const auto ref = torch::rand({1, 3, 6, 8}, torch::kFloat64);
  const auto v1 = torch::rand({1, 3, 6, 8}, torch::kFloat64);
  const auto v2 = torch::rand({1, 3, 6, 8}, torch::kFloat64);
  auto valid1 = torch::ones({1, 1, 6, 8}, torch::kBool);
  auto valid2 = torch::ones({1, 1, 6, 8}, torch::kBool);
  valid1.index_put_({0, 0, 0}, false);  // row 0: only view 2
  valid2.index_put_({0, 0, 1}, false);  // row 1: only view 1
  valid1.index_put_({0, 0, 2}, false);
  valid2.index_put_({0, 0, 2}, false);  // row 2: no view
  const std::vector<WarpedView> views{{v1, valid1}, {v2, valid2}};
  const auto map = min_reprojection_map(ref, views);

  const auto e1 = oracle::photometric(ref[0], v1[0], 0.15);
  const auto e2 = oracle::photometric(ref[0], v2[0], 0.15);
  double sum = 0.0;
  int count = 0;
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) {
      double expected = 0.0;
      bool any = true;
      if (y == 0) {
        expected = e2[y][x].item<double>();
      } else if (y == 1) {
        expected = e1[y][x].item<double>();
      } else if (y == 2) {
        any = false;
      } else {
        expected = std::min(e1[y][x].item<double>(), e2[y][x].item<double>());
      }
      EXPECT_EQ(map.valid[0][0][y][x].item<bool>(), any);
      EXPECT_NEAR(map.error[0][0][y][x].item<double>(), expected, 1e-12);
      if (any) {
        sum += expected;
        ++count;
      }
    }
  }
  EXPECT_NEAR(min_reprojection_loss(ref, views).item<double>(), sum / count, 1e-12);
}

TEST(MinReprojection, NoValidPixelGivesZeroLossWithGradient) {
  const auto ref = torch::rand({1, 3, 4, 4}, torch::kFloat64);
  auto v = torch::rand({1, 3, 4, 4}, torch::kFloat64).set_requires_grad(true);
  const std::vector<WarpedView> views{{v, torch::zeros({1, 1, 4, 4}, torch::kBool)}};
  const auto loss = min_reprojection_loss(ref, views);
  EXPECT_EQ(loss.item<double>(), 0.0);
  loss.backward();
  EXPECT_TRUE(torch::isfinite(v.grad()).all().item<bool>());
}

TEST(MinReprojection, RequiresAtLeastOneView) {
  EXPECT_THROW(min_reprojection_map(torch::rand({1, 3, 4, 4}), {}), InvalidInputError);
}

TEST(Smoothness, MatchesOracle) {
  torch::manual_seed(2);
  const auto depth = torch::rand({3, 1, 7, 9}, torch::kFloat64) * 5 + 0.5;
  const auto image = torch::rand({3, 3, 7, 9}, torch::kFloat64);
  double expected = 0.0;
  for (int b = 0; b < 3; ++b) expected += oracle::smoothness(depth[b][0], image[b]) / 3.0;
  EXPECT_NEAR(smoothness_loss(depth, image).item<double>(), expected, 1e-12);
}

TEST(Smoothness, InvariantToDepthScale) {
  const auto depth = torch::rand({2, 1, 8, 8}, torch::kFloat64) + 0.1;
  const auto image = torch::rand({2, 3, 8, 8}, torch::kFloat64);
  const double base = smoothness_loss(depth, image).item<double>();
  for (double s : {1e-3, 0.5, 7.0, 1e4}) {
    EXPECT_NEAR(smoothness_loss(depth * s, image).item<double>(), base, 1e-12 * std::max(1.0, base));
  }
}

TEST(Smoothness, ZeroForConstantDepth) {
  const auto image = torch::rand({1, 3, 5, 5}, torch::kFloat64);
  EXPECT_EQ(smoothness_loss(torch::full({1, 1, 5, 5}, 3.0, torch::kFloat64), image).item<double>(),
            0.0);
}

TEST(Smoothness, EdgesInTheImageDiscountDepthEdges) {
  auto depth = torch::ones({1, 1, 4, 8}, torch::kFloat64);
  depth.index_put_({0, 0, torch::indexing::Slice(), torch::indexing::Slice(4, 8)}, 2.0);
  auto flat = torch::zeros({1, 3, 4, 8}, torch::kFloat64);
  auto edge = flat.clone();
  edge.index_put_({0, torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(4, 8)}, 1.0);
  EXPECT_LT(smoothness_loss(depth, edge).item<double>(), smoothness_loss(depth, flat).item<double>());
}

TEST(Smoothness, RejectsMismatchedSizes) {
  EXPECT_THROW(smoothness_loss(torch::ones({1, 1, 4, 4}), torch::ones({1, 3, 4, 5})), ShapeError);
}

TEST(TotalLoss, AveragesScalesAndWeightsSmoothness) {
  const std::vector<ScaleLoss> scales{
      {torch::tensor(0.4, torch::kFloat64), torch::tensor(2.0, torch::kFloat64)},
      {torch::tensor(0.2, torch::kFloat64), torch::tensor(4.0, torch::kFloat64)},
      {torch::tensor(0.3, torch::kFloat64), torch::tensor(0.0, torch::kFloat64)},
      {torch::tensor(0.1, torch::kFloat64), torch::tensor(6.0, torch::kFloat64)}};
  LossWeights w;
  const auto out = total_loss(scales, w);
  EXPECT_NEAR(out.photometric_value(), 0.25, 1e-15);
  EXPECT_NEAR(out.smoothness_value(), 3.0, 1e-15);
  EXPECT_NEAR(out.total_value(), 0.25 + 0.001 * 3.0, 1e-15);
  ASSERT_EQ(out.per_scale.size(), 4u);
  EXPECT_EQ(out.per_scale[3].index, 3);
  EXPECT_DOUBLE_EQ(out.per_scale[1].smoothness, 4.0);
}

TEST(TotalLoss, RequiresAScale) {
  EXPECT_THROW(total_loss({}), InvalidInputError);
}
