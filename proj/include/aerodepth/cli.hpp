#pragma once

// Command-line front end: synth, prepare, train, finetune, infer, eval and
// colorize.

#include <torch/torch.h>

namespace aerodepth::cli {

/// Depth [H, W] to RGB [3, H, W] in [0, 1]: linear in inverse depth from the
/// nearest valid value (yellow) through red to the farthest (blue). Pixels
/// that are not finite and positive are black; a constant map is red.
torch::Tensor colorize_depth(const torch::Tensor& depth);

/// Runs one command. Returns 0 on success, 2 for usage or configuration
/// errors, 1 for runtime failures.
int run(int argc, const char* const* argv);

}  // namespace aerodepth::cli
