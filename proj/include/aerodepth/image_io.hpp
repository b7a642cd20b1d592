#pragma once

#include <filesystem>
#include <torch/torch.h>

namespace aerodepth::io {

/// Reads an 8-bit PNG/JPEG as a float RGB tensor [3, H, W] in [0, 1].
torch::Tensor read_image(const std::filesystem::path& path);

/// Writes a [3, H, W] (or [1, H, W]) tensor in [0, 1] as an 8-bit image.
/// The format follows the file extension.
void write_image(const std::filesystem::path& path, const torch::Tensor& image);

/// Resamples a [C, H, W] image to width x height with pixel-centre
/// alignment (area averaging when shrinking, bilinear when enlarging).
torch::Tensor resize_image(const torch::Tensor& image, int width, int height);

/// Rounds a [0, 1] image to the 8-bit grid, as writing and re-reading would.
torch::Tensor quantize_8bit(const torch::Tensor& image);

}  // namespace aerodepth::io
