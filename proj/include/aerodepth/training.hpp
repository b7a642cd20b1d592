#pragma once

// The training iteration (depth, pose, view synthesis, loss + update), the
// epoch loop with checkpointing and evaluation, fine-tuning and depth-only
// inference.
//
// Checkpoint directory layout (one per saved state):
//   depth.pt        depth network (encoder + decoder)
//   pose_head.pt    pose layers on top of the shared encoder
//   optimizer.pt    Adam moments and step counts
//   manifest.txt    encoder_kind, num_scales, depth_range, input_size, step, epoch
//   config.txt      full training configuration
//   state.txt       epoch loop bookkeeping (best score, plateau counter)
//
// A training run directory holds last/ (after the latest epoch), best/ (the
// epoch with the highest eval delta 1.25) and train_log.jsonl. Each log line
// is a JSON object:
//   {"kind":"step","epoch":e,"step":s,"loss":L,"photometric":Lp,"smoothness":Ls,"seconds":t}
//   {"kind":"epoch","epoch":e,"step":s,"loss":mean L,"photometric":..,"smoothness":..,
//    "eval":{"<source>":{"rmse":..,"l1_rel":..,"delta_1.25":..,"delta_1.15":..,"delta_1.05":..}},
//    "seconds":t}
// where step counts optimiser updates and seconds is wall-clock since start.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>
#include <torch/torch.h>

#include "aerodepth/config.hpp"
#include "aerodepth/data.hpp"
#include "aerodepth/evaluation.hpp"
#include "aerodepth/losses.hpp"
#include "aerodepth/networks.hpp"

namespace aerodepth::training {

struct TrainConfig {
  int batch_size = 20;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int max_epochs = 100;
  /// Stop after this many epochs without a new best eval delta 1.25.
  int plateau_patience = 15;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 0.0;
  /// Cap on updates per epoch; 0 means one full pass over the training split.
  int64_t steps_per_epoch = 0;
  double split_ratio = 0.9;
  bool split_guard = true;
  uint64_t seed = 0;
  int eval_batch = 8;

  networks::NetworkConfig network;  ///< also holds the input resolution
  losses::LossWeights loss;
  data::AugmentationConfig augmentation;

  /// Throws ConfigError for invalid values; returns warnings for legal but
  /// risky settings (batch size below 20).
  std::vector<std::string> validate() const;
};

/// Reads the [train], [network], [loss] and [augment] sections over `base`.
TrainConfig train_config_from(const config::KeyValueConfig& cfg, TrainConfig base = {});
config::KeyValueConfig to_key_values(const TrainConfig& cfg);

/// Compute device: AERODEPTH_DEVICE ("cpu", "cuda", "cuda:1", ...), default CPU.
torch::Device default_device();

struct Batch {
  torch::Tensor left;        ///< [B, 3, H, W]
  torch::Tensor ref;         ///< [B, 3, H, W]
  torch::Tensor right;       ///< [B, 3, H, W]
  torch::Tensor intrinsics;  ///< [B, 4] (fx, fy, cx, cy)
  std::vector<data::TripletIndex> ids;

  int64_t size() const { return ref.defined() ? ref.size(0) : 0; }
  Batch to(torch::Device device) const;
};

/// Stacks triplets of one resolution into a batch.
Batch collate(std::span<const data::Triplet> triplets);

/// View-synthesis objective for given predictions: each scale's depth is
/// upsampled to the input resolution, both matching images are warped into
/// the reference view with poses[:, 0] (left) and poses[:, 1] (right), and
/// the per-scale losses are aggregated.
losses::LossBreakdown reconstruction_loss(const Batch& batch,
                                          std::span<const torch::Tensor> sigmoids,
                                          const torch::Tensor& poses,
                                          const networks::NetworkConfig& network,
                                          const losses::LossWeights& weights);

class Trainer {
 public:
  /// Builds a freshly initialised model from cfg.network (seeded by cfg.seed).
  explicit Trainer(TrainConfig cfg, torch::Device device = torch::kCPU);
  Trainer(TrainConfig cfg, networks::DepthPoseModel model,
          torch::Device device = torch::kCPU);

  /// One iteration: depth for the reference images at every scale, poses for
  /// both matching images, view synthesis, loss and one Adam update. Returns
  /// the loss before the update. Throws DivergenceError on a non-finite loss.
  losses::LossBreakdown train_step(const Batch& batch);

  /// The loss of the current parameters without an update.
  losses::LossBreakdown compute_loss(const Batch& batch);

  networks::DepthPoseModel& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  torch::optim::Adam& optimizer() { return *optimizer_; }
  int64_t step() const { return step_; }
  void set_step(int64_t step) { step_ = step; }
  void set_learning_rate(double lr);
  torch::Device device() const { return device_; }

 private:
  losses::LossBreakdown forward(const Batch& batch);

  TrainConfig cfg_;
  torch::Device device_;
  networks::DepthPoseModel model_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  int64_t step_ = 0;
};

// --- checkpoints ------------------------------------------------------------

struct CheckpointManifest {
  networks::EncoderKind encoder = networks::EncoderKind::ResNet18;
  int num_scales = 4;
  double min_depth = 0.1;
  double max_depth = 100.0;
  int width = 0;
  int height = 0;
  int64_t step = 0;
  int epoch = 0;

  static CheckpointManifest read(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
};

struct LoopState {
  int epoch = 0;
  int64_t step = 0;
  double best_delta = -1.0;
  int best_epoch = 0;
  int epochs_without_improvement = 0;
};

void save_checkpoint(const std::filesystem::path& dir, Trainer& trainer,
                     const LoopState& state);

/// Restores model, optimiser and step into a trainer built from the
/// checkpoint's own configuration (overridable by `cfg`, which must describe
/// the same network). Throws ConfigError when the networks differ.
Trainer load_trainer(const std::filesystem::path& dir,
                     std::optional<TrainConfig> cfg = std::nullopt,
                     torch::Device device = torch::kCPU);
LoopState read_loop_state(const std::filesystem::path& dir);
TrainConfig read_checkpoint_config(const std::filesystem::path& dir);

/// Depth network only; the pose head is never loaded.
networks::DepthNet load_depth_network(const std::filesystem::path& dir,
                                      networks::NetworkConfig* network = nullptr,
                                      torch::Device device = torch::kCPU);

// --- evaluation during training ----------------------------------------------

struct EvalSample {
  torch::Tensor image;  ///< [3, H, W] at the working resolution
  evaluation::GroundTruth truth;
  data::TripletIndex source;
};

/// Centre frames of `triplets` that have a ground-truth file.
std::vector<EvalSample> make_eval_set(const data::Dataset& dataset,
                                      std::span<const data::TripletIndex> triplets);

/// Scale-0 depth for images [B, 3, H, W]; returns [B, 1, H, W].
torch::Tensor predict_depth(networks::DepthNet& net, const torch::Tensor& images);

/// Mean report over the samples (each median-scaled separately).
evaluation::EvalReport evaluate_model(networks::DepthNet& net,
                                      std::span<const EvalSample> samples,
                                      int batch_size = 8);

// --- epoch loop ---------------------------------------------------------------

/// Train/eval split of all dataset triplets using cfg.split_ratio,
/// cfg.split_guard and cfg.seed.
data::Split split_for(const data::Dataset& dataset, const TrainConfig& cfg);

struct TrainSource {
  std::string name;
  const data::Dataset* dataset = nullptr;
  data::Split split;
};

struct EpochRecord {
  int epoch = 0;
  int64_t step = 0;
  double loss = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  /// Eval report per source name (missing when a source has no ground truth).
  std::map<std::string, evaluation::EvalReport> eval;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  /// Evaluation before the first update (fine-tuning only).
  std::optional<EpochRecord> initial;
  int best_epoch = 0;
  double best_delta = -1.0;
  bool stopped_on_plateau = false;
  std::filesystem::path best_dir;
  std::filesystem::path last_dir;
};

struct RunOptions {
  /// Continue from out_dir/last when it exists.
  bool resume = true;
  /// Stop after this many epochs of the current invocation (0 = no limit);
  /// used to split a run into resumable pieces.
  int epoch_budget = 0;
  bool verbose = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains from scratch on source.split.train; evaluates on source.split.eval
/// after every epoch.
TrainResult train(const TrainSource& source, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir, const RunOptions& options = {},
                  torch::Device device = torch::kCPU);

/// Continues training of `checkpoint` (parameters and optimiser state) on
/// `target`. When `previous` is given a fraction `mix_old` of every batch is
/// drawn from its training split, and its eval split is reported as well.
/// With max_epochs == 0 the input checkpoint is copied unchanged.
TrainResult finetune(const std::filesystem::path& checkpoint, const TrainSource& target,
                     const TrainSource* previous, double mix_old, const TrainConfig& cfg,
                     const std::filesystem::path& out_dir, const RunOptions& options = {},
                     torch::Device device = torch::kCPU);

/// Reads train_log.jsonl records of kind "step" as (step, loss, photometric,
/// smoothness) rows.
std::vector<std::array<double, 4>> read_step_log(const std::filesystem::path& log);

// --- inference ----------------------------------------------------------------

/// Resizes `image` ([3, h, w], any size) to the network input and returns the
/// scale-0 depth [H, W] in scene units.
torch::Tensor infer(networks::DepthNet& net, const torch::Tensor& image);

struct Throughput {
  int64_t images = 0;
  double seconds = 0.0;
  double fps() const { return seconds > 0.0 ? images / seconds : 0.0; }
};

/// Times `repeats` forward passes on a random batch of `batch` images.
Throughput measure_throughput(networks::DepthNet& net, int batch, int repeats = 1);

}  // namespace aerodepth::training
