#include "aerodepth/losses.hpp"

#include <cmath>
#include <limits>

#include "aerodepth/errors.hpp"

namespace aerodepth::losses {

namespace F = torch::nn::functional;
using torch::indexing::None;
using torch::indexing::Slice;

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b,
                        const char* what) {
  if (a.dim() != 4 || a.sizes() != b.sizes()) {
    throw ShapeError(std::string(what) + ": images must share a [B, C, H, W] shape");
  }
}

torch::Tensor box3(const torch::Tensor& x) {
  const auto padded = F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReflect));
  return F::avg_pool2d(padded, F::AvgPool2dFuncOptions(3).stride(1));
}

}  // namespace

void LossWeights::validate() const {
  if (!(smoothness >= 0.0) || !std::isfinite(smoothness)) {
    throw ConfigError("smoothness weight must be >= 0");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in [0, 1]");
  }
}

torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b) {
  require_same_shape(a, b, "ssim");
  const auto mu_a = box3(a);
  const auto mu_b = box3(b);
  const auto var_a = box3(a * a) - mu_a * mu_a;
  const auto var_b = box3(b * b) - mu_b * mu_b;
  const auto cov = box3(a * b) - mu_a * mu_b;
  const auto num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
  const auto den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
  return (num / den).mean(1, /*keepdim=*/true);
}

torch::Tensor photometric_error(const torch::Tensor& a, const torch::Tensor& b,
                                const LossWeights& weights) {
  require_same_shape(a, b, "photometric_error");
  const auto l1 = (a - b).abs().mean(1, /*keepdim=*/true);
  const auto structural = (1.0 - ssim(a, b)).clamp(0.0, 2.0) / 2.0;
  return weights.alpha * structural + (1.0 - weights.alpha) * l1;
}

MinReprojection min_reprojection_map(const torch::Tensor& reference,
                                     std::span<const WarpedView> warped,
                                     const LossWeights& weights) {
  if (warped.empty()) {
    throw InvalidInputError("min_reprojection needs at least one warped view");
  }
  const auto inf = std::numeric_limits<double>::infinity();
  torch::Tensor best;
  torch::Tensor any_valid;
  for (const auto& view : warped) {
    auto err = photometric_error(reference, view.image, weights);
    torch::Tensor valid = view.valid.defined()
                              ? view.valid.to(torch::kBool)
                              : torch::ones_like(err, torch::kBool);
    if (valid.sizes() != err.sizes()) {
      throw ShapeError("validity mask must be [B, 1, H, W]");
    }
    err = torch::where(valid, err, torch::full_like(err, inf));
    best = best.defined() ? torch::minimum(best, err) : err;
    any_valid = any_valid.defined() ? (any_valid | valid) : valid;
  }
  MinReprojection out;
  out.valid = any_valid;
  out.error = torch::where(any_valid, best, torch::zeros_like(best));
  return out;
}

torch::Tensor min_reprojection_loss(const torch::Tensor& reference,
                                    std::span<const WarpedView> warped,
                                    const LossWeights& weights) {
  const auto m = min_reprojection_map(reference, warped, weights);
  const auto count = m.valid.sum();
  if (count.item<int64_t>() == 0) return m.error.sum() * 0.0;
  return m.error.sum() / count.to(m.error.dtype());
}

torch::Tensor smoothness_loss(const torch::Tensor& depth,
                              const torch::Tensor& reference) {
  if (depth.dim() != 4 || depth.size(1) != 1 || reference.dim() != 4 ||
      depth.size(0) != reference.size(0) || depth.size(2) != reference.size(2) ||
      depth.size(3) != reference.size(3)) {
    throw ShapeError("smoothness_loss: depth [B,1,H,W] must match the image size");
  }
  const auto mean_depth = depth.mean({2, 3}, /*keepdim=*/true);
  const auto d = depth / mean_depth;

  const auto dx = (d.index({Slice(), Slice(), Slice(), Slice(0, -1)}) -
                   d.index({Slice(), Slice(), Slice(), Slice(1, None)}))
                      .abs();
  const auto dy = (d.index({Slice(), Slice(), Slice(0, -1), Slice()}) -
                   d.index({Slice(), Slice(), Slice(1, None), Slice()}))
                      .abs();
  const auto ix = (reference.index({Slice(), Slice(), Slice(), Slice(0, -1)}) -
                   reference.index({Slice(), Slice(), Slice(), Slice(1, None)}))
                      .abs()
                      .mean(1, /*keepdim=*/true);
  const auto iy = (reference.index({Slice(), Slice(), Slice(0, -1), Slice()}) -
                   reference.index({Slice(), Slice(), Slice(1, None), Slice()}))
                      .abs()
                      .mean(1, /*keepdim=*/true);
  return (dx * torch::exp(-ix)).mean() + (dy * torch::exp(-iy)).mean();
}

double LossBreakdown::total_value() const { return total.item<double>(); }
double LossBreakdown::photometric_value() const { return photometric.item<double>(); }
double LossBreakdown::smoothness_value() const { return smoothness.item<double>(); }

LossBreakdown total_loss(std::span<const ScaleLoss> scales,
                         const LossWeights& weights) {
  if (scales.empty()) throw InvalidInputError("total_loss needs at least one scale");
  weights.validate();
  LossBreakdown out;
  std::vector<torch::Tensor> photometric;
  std::vector<torch::Tensor> smoothness;
  int index = 0;
  for (const auto& s : scales) {
    photometric.push_back(s.photometric);
    smoothness.push_back(s.smoothness);
    out.per_scale.push_back(
        {index++, s.photometric.item<double>(), s.smoothness.item<double>()});
  }
  out.photometric = torch::stack(photometric).mean();
  out.smoothness = torch::stack(smoothness).mean();
  out.total = out.photometric + weights.smoothness * out.smoothness;
  return out;
}

}  // namespace aerodepth::losses
