#include "aerodepth/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "aerodepth/errors.hpp"
#include "aerodepth/geometry.hpp"
#include "aerodepth/image_io.hpp"

namespace aerodepth::training {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string flip_name(data::FlipMode mode) {
  return mode == data::FlipMode::Temporal ? "temporal" : "mirror";
}

data::FlipMode parse_flip(const std::string& name) {
  if (name == "temporal") return data::FlipMode::Temporal;
  if (name == "mirror") return data::FlipMode::Mirror;
  throw ConfigError("augment.flip_mode must be 'temporal' or 'mirror', got '" + name + "'");
}

json report_json(const evaluation::EvalReport& r) {
  return {{"rmse", r.rmse},
          {"l1_rel", r.l1_rel},
          {"delta_1.25", r.delta[0]},
          {"delta_1.15", r.delta[1]},
          {"delta_1.05", r.delta[2]},
          {"valid_pixels", r.valid_pixels}};
}

evaluation::EvalReport report_from_json(const json& j) {
  evaluation::EvalReport r;
  r.rmse = j.at("rmse").get<double>();
  r.l1_rel = j.at("l1_rel").get<double>();
  r.delta = {j.at("delta_1.25").get<double>(), j.at("delta_1.15").get<double>(),
             j.at("delta_1.05").get<double>()};
  r.valid_pixels = j.value("valid_pixels", int64_t{0});
  return r;
}

json epoch_json(const std::string& kind, const EpochRecord& rec) {
  json eval = json::object();
  for (const auto& [name, report] : rec.eval) eval[name] = report_json(report);
  return {{"kind", kind},           {"epoch", rec.epoch},
          {"step", rec.step},       {"loss", rec.loss},
          {"photometric", rec.photometric}, {"smoothness", rec.smoothness},
          {"eval", eval},           {"seconds", rec.seconds}};
}

EpochRecord epoch_from_json(const json& j) {
  EpochRecord rec;
  rec.epoch = j.at("epoch").get<int>();
  rec.step = j.at("step").get<int64_t>();
  rec.loss = j.at("loss").get<double>();
  rec.photometric = j.at("photometric").get<double>();
  rec.smoothness = j.at("smoothness").get<double>();
  rec.seconds = j.at("seconds").get<double>();
  for (const auto& [name, report] : j.at("eval").items()) {
    rec.eval[name] = report_from_json(report);
  }
  return rec;
}

std::vector<json> read_log(const fs::path& path) {
  std::vector<json> records;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::exception&) {
      break;  // torn final line after an interrupted write
    }
  }
  return records;
}

void append_log(const fs::path& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  out << record.dump() << '\n';
  if (!out) throw IoError("failed writing training log " + path.string());
}

// Keeps only records written up to the end of `epoch` (used when resuming).
void truncate_log(const fs::path& path, int epoch) {
  if (!fs::exists(path)) return;
  std::vector<json> kept;
  for (auto& r : read_log(path)) {
    if (r.at("epoch").get<int>() <= epoch) kept.push_back(std::move(r));
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& r : kept) out << r.dump() << '\n';
    if (!out) throw IoError("failed rewriting training log " + path.string());
  }
  fs::rename(tmp, path);
}

void check_network_match(const networks::NetworkConfig& expected,
                         const networks::NetworkConfig& actual,
                         const std::string& where) {
  if (expected == actual) return;
  std::ostringstream msg;
  msg << where << ": checkpoint network (" << networks::to_string(actual.encoder) << ", "
      << actual.num_scales << " scales, " << actual.width << "x" << actual.height
      << ", depth " << actual.min_depth << ".." << actual.max_depth
      << ") differs from the configured network ("
      << networks::to_string(expected.encoder) << ", " << expected.num_scales << " scales, "
      << expected.width << "x" << expected.height << ", depth " << expected.min_depth << ".."
      << expected.max_depth << ")";
  throw ConfigError(msg.str());
}

void write_loop_state(const fs::path& path, const LoopState& s, double seconds) {
  std::ofstream out(path);
  out.precision(17);
  out << "epoch = " << s.epoch << "\nstep = " << s.step << "\nbest_delta = " << s.best_delta
      << "\nbest_epoch = " << s.best_epoch
      << "\nepochs_without_improvement = " << s.epochs_without_improvement
      << "\nseconds = " << seconds << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

double read_seconds(const fs::path& dir) {
  const auto cfg = config::KeyValueConfig::read(dir / "state.txt");
  return cfg.get_double("seconds", 0.0);
}

}  // namespace

// --- configuration ------------------------------------------------------------

std::vector<std::string> TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (max_epochs < 0) throw ConfigError("train.max_epochs must be >= 0");
  if (plateau_patience < 1) throw ConfigError("train.plateau_patience must be >= 1");
  if (grad_clip < 0.0) throw ConfigError("train.grad_clip must be >= 0");
  if (steps_per_epoch < 0) throw ConfigError("train.steps_per_epoch must be >= 0");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw ConfigError("train.split_ratio must lie in (0, 1)");
  }
  if (eval_batch < 1) throw ConfigError("train.eval_batch must be >= 1");
  network.validate();
  loss.validate();
  augmentation.validate();

  std::vector<std::string> warnings;
  if (batch_size < 20) {
    warnings.push_back("batch size " + std::to_string(batch_size) +
                       " is below 20; small batches mix few camera motions and training "
                       "can become unstable");
  }
  return warnings;
}

TrainConfig train_config_from(const config::KeyValueConfig& cfg, TrainConfig c) {
  c.batch_size = static_cast<int>(cfg.get_int("train.batch_size", c.batch_size));
  c.learning_rate = cfg.get_double("train.learning_rate", c.learning_rate);
  c.adam_beta1 = cfg.get_double("train.adam_beta1", c.adam_beta1);
  c.adam_beta2 = cfg.get_double("train.adam_beta2", c.adam_beta2);
  c.max_epochs = static_cast<int>(cfg.get_int("train.max_epochs", c.max_epochs));
  c.plateau_patience = static_cast<int>(cfg.get_int("train.plateau_patience", c.plateau_patience));
  c.grad_clip = cfg.get_double("train.grad_clip", c.grad_clip);
  c.steps_per_epoch = cfg.get_int("train.steps_per_epoch", c.steps_per_epoch);
  c.split_ratio = cfg.get_double("train.split_ratio", c.split_ratio);
  c.split_guard = cfg.get_bool("train.split_guard", c.split_guard);
  c.seed = static_cast<uint64_t>(cfg.get_int("train.seed", static_cast<int64_t>(c.seed)));
  c.eval_batch = static_cast<int>(cfg.get_int("train.eval_batch", c.eval_batch));

  auto& n = c.network;
  n.encoder = networks::parse_encoder_kind(
      cfg.get_string("network.encoder", networks::to_string(n.encoder)));
  n.num_scales = static_cast<int>(cfg.get_int("network.num_scales", n.num_scales));
  n.min_depth = cfg.get_double("network.min_depth", n.min_depth);
  n.max_depth = cfg.get_double("network.max_depth", n.max_depth);
  n.width = static_cast<int>(cfg.get_int("network.width", n.width));
  n.height = static_cast<int>(cfg.get_int("network.height", n.height));
  n.pose_scale = cfg.get_double("network.pose_scale", n.pose_scale);
  const auto dec = cfg.get_doubles(
      "network.decoder_widths",
      std::vector<double>(n.decoder_widths.begin(), n.decoder_widths.end()));
  if (dec.size() != 5) throw ConfigError("network.decoder_widths expects five numbers");
  for (size_t i = 0; i < 5; ++i) n.decoder_widths[i] = static_cast<int64_t>(dec[i]);
  const auto pose = cfg.get_doubles(
      "network.pose_widths", std::vector<double>(n.pose_widths.begin(), n.pose_widths.end()));
  if (pose.size() != 2) throw ConfigError("network.pose_widths expects two numbers");
  for (size_t i = 0; i < 2; ++i) n.pose_widths[i] = static_cast<int64_t>(pose[i]);

  c.loss.smoothness = cfg.get_double("loss.smoothness", c.loss.smoothness);
  c.loss.alpha = cfg.get_double("loss.alpha", c.loss.alpha);

  auto& a = c.augmentation;
  a.enabled = cfg.get_bool("augment.enabled", a.enabled);
  a.flip_probability = cfg.get_double("augment.flip_probability", a.flip_probability);
  a.flip_mode = parse_flip(cfg.get_string("augment.flip_mode", flip_name(a.flip_mode)));
  a.brightness = cfg.get_double("augment.brightness", a.brightness);
  a.contrast = cfg.get_double("augment.contrast", a.contrast);
  a.saturation = cfg.get_double("augment.saturation", a.saturation);
  a.hue = cfg.get_double("augment.hue", a.hue);
  a.min_crop_scale = cfg.get_double("augment.min_crop_scale", a.min_crop_scale);
  a.max_crop_scale = cfg.get_double("augment.max_crop_scale", a.max_crop_scale);
  return c;
}

config::KeyValueConfig to_key_values(const TrainConfig& c) {
  config::KeyValueConfig kv;
  auto num = [&](const std::string& key, double v) { kv.set(key, format_number(v)); };
  num("train.batch_size", c.batch_size);
  num("train.learning_rate", c.learning_rate);
  num("train.adam_beta1", c.adam_beta1);
  num("train.adam_beta2", c.adam_beta2);
  num("train.max_epochs", c.max_epochs);
  num("train.plateau_patience", c.plateau_patience);
  num("train.grad_clip", c.grad_clip);
  kv.set("train.steps_per_epoch", std::to_string(c.steps_per_epoch));
  num("train.split_ratio", c.split_ratio);
  kv.set("train.split_guard", c.split_guard ? "true" : "false");
  kv.set("train.seed", std::to_string(c.seed));
  num("train.eval_batch", c.eval_batch);

  const auto& n = c.network;
  kv.set("network.encoder", networks::to_string(n.encoder));
  num("network.num_scales", n.num_scales);
  num("network.min_depth", n.min_depth);
  num("network.max_depth", n.max_depth);
  num("network.width", n.width);
  num("network.height", n.height);
  num("network.pose_scale", n.pose_scale);
  std::string dec;
  for (size_t i = 0; i < n.decoder_widths.size(); ++i) {
    dec += (i ? "," : "") + std::to_string(n.decoder_widths[i]);
  }
  kv.set("network.decoder_widths", dec);
  kv.set("network.pose_widths",
         std::to_string(n.pose_widths[0]) + "," + std::to_string(n.pose_widths[1]));

  num("loss.smoothness", c.loss.smoothness);
  num("loss.alpha", c.loss.alpha);

  const auto& a = c.augmentation;
  kv.set("augment.enabled", a.enabled ? "true" : "false");
  num("augment.flip_probability", a.flip_probability);
  kv.set("augment.flip_mode", flip_name(a.flip_mode));
  num("augment.brightness", a.brightness);
  num("augment.contrast", a.contrast);
  num("augment.saturation", a.saturation);
  num("augment.hue", a.hue);
  num("augment.min_crop_scale", a.min_crop_scale);
  num("augment.max_crop_scale", a.max_crop_scale);
  return kv;
}

torch::Device default_device() {
  const char* env = std::getenv("AERODEPTH_DEVICE");
  if (env == nullptr || *env == '\0') return torch::kCPU;
  try {
    torch::Device device{std::string(env)};
    if (device.is_cuda() && !torch::cuda::is_available()) {
      throw ConfigError("AERODEPTH_DEVICE=" + std::string(env) + " but CUDA is unavailable");
    }
    return device;
  } catch (const c10::Error&) {
    throw ConfigError("AERODEPTH_DEVICE: unrecognised device '" + std::string(env) + "'");
  }
}

// --- batches and loss ---------------------------------------------------------

Batch Batch::to(torch::Device device) const {
  return {left.to(device), ref.to(device), right.to(device), intrinsics.to(device), ids};
}

Batch collate(std::span<const data::Triplet> triplets) {
  if (triplets.empty()) throw InvalidInputError("cannot collate an empty batch");
  std::vector<torch::Tensor> l, r, rt, k;
  Batch batch;
  for (const auto& t : triplets) {
    if (t.ref.sizes() != triplets.front().ref.sizes()) {
      throw ShapeError("all triplets of a batch need the same resolution");
    }
    l.push_back(t.left);
    r.push_back(t.ref);
    rt.push_back(t.right);
    k.push_back(t.intrinsics.to_tensor());
    batch.ids.push_back(t.source);
  }
  batch.left = torch::stack(l);
  batch.ref = torch::stack(r);
  batch.right = torch::stack(rt);
  batch.intrinsics = torch::stack(k);
  return batch;
}

losses::LossBreakdown reconstruction_loss(const Batch& batch,
                                          std::span<const torch::Tensor> sigmoids,
                                          const torch::Tensor& poses,
                                          const networks::NetworkConfig& network,
                                          const losses::LossWeights& weights) {
  if (sigmoids.empty()) throw InvalidInputError("no depth scales given");
  const int64_t b = batch.size();
  if (poses.dim() != 3 || poses.size(0) != b || poses.size(1) != 2 || poses.size(2) != 6) {
    throw ShapeError("poses must be [B, 2, 6]");
  }
  const int64_t h = batch.ref.size(2);
  const int64_t w = batch.ref.size(3);
  const auto k = batch.intrinsics.to(batch.ref.dtype());
  const auto to_left = poses.select(1, 0);
  const auto to_right = poses.select(1, 1);

  std::vector<losses::ScaleLoss> scales;
  for (const auto& sigmoid : sigmoids) {
    auto depth = networks::sigmoid_to_depth(sigmoid, network);
    if (depth.size(2) != h || depth.size(3) != w) depth = geometry::upsample_to(depth, h, w);
    const auto left = geometry::project_and_sample(batch.left, depth, to_left, k);
    const auto right = geometry::project_and_sample(batch.right, depth, to_right, k);
    const std::array<losses::WarpedView, 2> views{{{left.image, left.valid},
                                                   {right.image, right.valid}}};
    scales.push_back({losses::min_reprojection_loss(batch.ref, views, weights),
                      losses::smoothness_loss(depth, batch.ref)});
  }
  return losses::total_loss(scales, weights);
}

// --- trainer ------------------------------------------------------------------

namespace {

std::string divergence_message(const std::string& what, int64_t step, const Batch& batch) {
  std::ostringstream msg;
  msg << what << " at step " << step << "; batch";
  for (const auto& id : batch.ids) msg << ' ' << id.sequence << ':' << id.center;
  return msg.str();
}

networks::DepthPoseModel seeded_model(const TrainConfig& cfg) {
  cfg.validate();
  torch::manual_seed(cfg.seed);
  return networks::build_model(cfg.network);
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, torch::Device device)
    : Trainer(cfg, seeded_model(cfg), device) {}

Trainer::Trainer(TrainConfig cfg, networks::DepthPoseModel model, torch::Device device)
    : cfg_(std::move(cfg)), device_(device), model_(std::move(model)) {
  cfg_.validate();
  model_.depth->to(device_);
  model_.pose->to(device_);
  optimizer_ = std::make_unique<torch::optim::Adam>(
      model_.parameters(), torch::optim::AdamOptions(cfg_.learning_rate)
                               .betas({cfg_.adam_beta1, cfg_.adam_beta2}));
}

void Trainer::set_learning_rate(double lr) {
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options())
        .lr(lr)
        .betas({cfg_.adam_beta1, cfg_.adam_beta2});
  }
  cfg_.learning_rate = lr;
}

losses::LossBreakdown Trainer::forward(const Batch& batch) {
  const int64_t b = batch.size();
  if (b < 1) throw InvalidInputError("empty batch");
  const auto& net = cfg_.network;
  if (batch.ref.size(2) != net.height || batch.ref.size(3) != net.width) {
    throw ShapeError("batch resolution " + std::to_string(batch.ref.size(3)) + "x" +
                     std::to_string(batch.ref.size(2)) + " differs from the network input " +
                     std::to_string(net.width) + "x" + std::to_string(net.height));
  }
  const auto features =
      model_.depth->encoder()->forward(torch::cat({batch.left, batch.ref, batch.right}, 0));
  std::vector<torch::Tensor> ref_features;
  for (const auto& f : features) ref_features.push_back(f.narrow(0, b, b));
  const auto sigmoids = model_.depth->decode(ref_features, net.height, net.width);
  const auto& deep = features.back();
  const auto poses =
      model_.pose->head()->forward(deep.narrow(0, 0, b), deep.narrow(0, b, b),
                                   deep.narrow(0, 2 * b, b));
  if (!torch::isfinite(poses).all().item<bool>()) {
    throw DivergenceError(divergence_message("non-finite pose prediction", step_, batch));
  }
  return reconstruction_loss(batch, sigmoids, poses, net, cfg_.loss);
}

losses::LossBreakdown Trainer::compute_loss(const Batch& batch) {
  torch::NoGradGuard no_grad;
  model_.train(true);
  auto loss = forward(batch.to(device_));
  loss.total = loss.total.detach();
  return loss;
}

losses::LossBreakdown Trainer::train_step(const Batch& input) {
  model_.train(true);
  const Batch batch = input.to(device_);
  auto loss = forward(batch);
  if (!torch::isfinite(loss.total).item<bool>()) {
    std::ostringstream what;
    what << "non-finite loss (total=" << loss.total_value()
         << " photometric=" << loss.photometric_value()
         << " smoothness=" << loss.smoothness_value() << ")";
    throw DivergenceError(divergence_message(what.str(), step_, batch));
  }
  optimizer_->zero_grad();
  loss.total.backward();
  if (cfg_.grad_clip > 0.0) {
    torch::nn::utils::clip_grad_norm_(model_.parameters(), cfg_.grad_clip);
  }
  optimizer_->step();
  ++step_;
  loss.total = loss.total.detach();
  loss.photometric = loss.photometric.detach();
  loss.smoothness = loss.smoothness.detach();
  return loss;
}

// --- checkpoints ----------------------------------------------------------------

CheckpointManifest CheckpointManifest::read(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing checkpoint manifest " + path.string());
  const auto cfg = config::KeyValueConfig::read(path);
  CheckpointManifest m;
  m.encoder = networks::parse_encoder_kind(cfg.get_string("encoder_kind", "resnet18"));
  m.num_scales = static_cast<int>(cfg.get_int("num_scales", m.num_scales));
  const auto range = cfg.get_doubles("depth_range", {m.min_depth, m.max_depth});
  const auto size = cfg.get_doubles("input_size", {0.0, 0.0});
  if (range.size() != 2 || size.size() != 2) {
    throw IoError(path.string() + ": depth_range and input_size need two values");
  }
  m.min_depth = range[0];
  m.max_depth = range[1];
  m.width = static_cast<int>(size[0]);
  m.height = static_cast<int>(size[1]);
  m.step = cfg.get_int("step", 0);
  m.epoch = static_cast<int>(cfg.get_int("epoch", 0));
  return m;
}

void CheckpointManifest::write(const fs::path& path) const {
  std::ofstream out(path);
  out << "encoder_kind = " << networks::to_string(encoder) << "\nnum_scales = " << num_scales
      << "\ndepth_range = " << format_number(min_depth) << ", " << format_number(max_depth)
      << "\ninput_size = " << width << ", " << height << "\nstep = " << step
      << "\nepoch = " << epoch << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void save_checkpoint(const fs::path& dir, Trainer& trainer, const LoopState& state) {
  // Written next to the target and swapped in, so an interrupted save leaves
  // the previous checkpoint intact.
  const fs::path tmp = dir.string() + ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  auto& model = trainer.model();
  torch::save(model.depth, (tmp / "depth.pt").string());
  torch::save(model.pose->head(), (tmp / "pose_head.pt").string());
  torch::save(trainer.optimizer(), (tmp / "optimizer.pt").string());
  const auto& net = trainer.config().network;
  CheckpointManifest m{net.encoder, net.num_scales, net.min_depth, net.max_depth,
                       net.width,   net.height,     trainer.step(), state.epoch};
  m.write(tmp / "manifest.txt");
  {
    std::ofstream cfg(tmp / "config.txt");
    cfg << to_key_values(trainer.config()).dump();
    if (!cfg) throw IoError("failed writing " + (tmp / "config.txt").string());
  }
  write_loop_state(tmp / "state.txt", state, 0.0);
  const fs::path old = dir.string() + ".old";
  fs::remove_all(old);
  if (fs::exists(dir)) fs::rename(dir, old);
  fs::rename(tmp, dir);
  fs::remove_all(old);
}

TrainConfig read_checkpoint_config(const fs::path& dir) {
  const auto path = dir / "config.txt";
  if (!fs::exists(path)) throw IoError("missing checkpoint config " + path.string());
  auto cfg = train_config_from(config::KeyValueConfig::read(path));
  const auto m = CheckpointManifest::read(dir / "manifest.txt");
  const auto& n = cfg.network;
  if (m.encoder != n.encoder || m.num_scales != n.num_scales || m.width != n.width ||
      m.height != n.height || m.min_depth != n.min_depth || m.max_depth != n.max_depth) {
    throw IoError(dir.string() + ": manifest and config disagree");
  }
  return cfg;
}

LoopState read_loop_state(const fs::path& dir) {
  const auto cfg = config::KeyValueConfig::read(dir / "state.txt");
  LoopState s;
  s.epoch = static_cast<int>(cfg.get_int("epoch", 0));
  s.step = cfg.get_int("step", 0);
  s.best_delta = cfg.get_double("best_delta", -1.0);
  s.best_epoch = static_cast<int>(cfg.get_int("best_epoch", 0));
  s.epochs_without_improvement = static_cast<int>(cfg.get_int("epochs_without_improvement", 0));
  return s;
}

Trainer load_trainer(const fs::path& dir, std::optional<TrainConfig> cfg,
                     torch::Device device) {
  const TrainConfig stored = read_checkpoint_config(dir);
  if (cfg) check_network_match(cfg->network, stored.network, dir.string());
  const TrainConfig use = cfg.value_or(stored);
  auto model = networks::build_model(use.network);
  torch::load(model.depth, (dir / "depth.pt").string());
  auto head = model.pose->head();
  torch::load(head, (dir / "pose_head.pt").string());
  Trainer trainer(use, model, device);
  torch::load(trainer.optimizer(), (dir / "optimizer.pt").string(), device);
  trainer.set_learning_rate(use.learning_rate);
  trainer.set_step(CheckpointManifest::read(dir / "manifest.txt").step);
  return trainer;
}

networks::DepthNet load_depth_network(const fs::path& dir, networks::NetworkConfig* network,
                                      torch::Device device) {
  const auto cfg = read_checkpoint_config(dir);
  auto net = networks::build_depth_network(cfg.network);
  torch::load(net, (dir / "depth.pt").string(), device);
  net->to(device);
  net->eval();
  if (network != nullptr) *network = cfg.network;
  return net;
}

// --- evaluation -------------------------------------------------------------------

std::vector<EvalSample> make_eval_set(const data::Dataset& dataset,
                                      std::span<const data::TripletIndex> triplets) {
  std::vector<EvalSample> samples;
  for (const auto& t : triplets) {
    const auto& frame = dataset.sequence(t.sequence).frames.at(t.center);
    if (frame.depth.empty()) continue;
    samples.push_back({dataset.image(t.sequence, t.center),
                       evaluation::load_ground_truth(frame.depth), t});
  }
  return samples;
}

torch::Tensor predict_depth(networks::DepthNet& net, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  const bool was_training = net->is_training();
  net->eval();
  const auto sigmoid = net->forward(images).front();
  net->train(was_training);
  return networks::sigmoid_to_depth(sigmoid, net->config());
}

evaluation::EvalReport evaluate_model(networks::DepthNet& net,
                                      std::span<const EvalSample> samples, int batch_size) {
  if (samples.empty()) throw InvalidInputError("no evaluation samples with ground truth");
  const auto device = net->parameters().front().device();
  std::vector<evaluation::EvalReport> reports;
  for (size_t start = 0; start < samples.size(); start += batch_size) {
    const size_t end = std::min(samples.size(), start + static_cast<size_t>(batch_size));
    std::vector<torch::Tensor> images;
    for (size_t i = start; i < end; ++i) images.push_back(samples[i].image);
    const auto depth = predict_depth(net, torch::stack(images).to(device)).to(torch::kCPU);
    for (size_t i = start; i < end; ++i) {
      const auto& truth = samples[i].truth;
      reports.push_back(evaluation::evaluate(depth[i - start][0], truth.depth, truth.valid));
    }
  }
  return evaluation::mean_report(reports);
}

data::Split split_for(const data::Dataset& dataset, const TrainConfig& cfg) {
  const auto triplets = dataset.triplets();
  return data::split_train_eval(triplets, cfg.split_ratio, cfg.seed, cfg.split_guard);
}

// --- epoch loop ---------------------------------------------------------------------

namespace {

struct Source {
  const TrainSource* source = nullptr;
  std::vector<EvalSample> eval;
};

std::vector<data::TripletIndex> shuffled(const std::vector<data::TripletIndex>& items,
                                         uint64_t seed) {
  auto out = items;
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

EpochRecord evaluate_sources(networks::DepthNet& net, std::span<const Source> sources,
                             int batch) {
  EpochRecord rec;
  for (const auto& s : sources) {
    if (!s.eval.empty()) rec.eval[s.source->name] = evaluate_model(net, s.eval, batch);
  }
  return rec;
}

void print_epoch(const EpochRecord& rec) {
  std::cout << "epoch " << rec.epoch << " step " << rec.step << " loss " << rec.loss;
  for (const auto& [name, r] : rec.eval) {
    std::cout << " | " << name << " d1.25=" << r.delta[0] << " l1rel=" << r.l1_rel;
  }
  std::cout << " (" << static_cast<int>(rec.seconds) << " s)" << std::endl;
}

// Loop body shared by train() and finetune(). `sources[0]` drives the epoch;
// `sources[1]`, when present, contributes `mix` of every batch.
TrainResult run_epochs(Trainer& trainer, std::span<const Source> sources, double mix,
                       LoopState state, double seconds_before, const fs::path& out_dir,
                       const RunOptions& options, TrainResult result) {
  const auto& cfg = trainer.config();
  const fs::path log = out_dir / "train_log.jsonl";
  result.best_dir = out_dir / "best";
  result.last_dir = out_dir / "last";
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return seconds_before +
           std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const auto& primary = *sources[0].source;
  if (primary.split.train.empty()) throw InvalidInputError(primary.name + ": empty training split");
  const int batch_size = cfg.batch_size;
  const int n_old = sources.size() > 1
                        ? std::clamp(static_cast<int>(std::lround(mix * batch_size)), 0,
                                     batch_size - 1)
                        : 0;
  const int n_new = batch_size - n_old;
  const bool has_eval = !sources[0].eval.empty();

  int budget = options.epoch_budget;
  while (state.epoch < cfg.max_epochs) {
    if (has_eval && state.epochs_without_improvement >= cfg.plateau_patience) {
      result.stopped_on_plateau = true;
      break;
    }
    if (options.epoch_budget > 0 && budget-- == 0) break;
    const int epoch = state.epoch + 1;
    const auto order = shuffled(primary.split.train, data::mix_seed(cfg.seed, epoch));
    std::vector<data::TripletIndex> old_order;
    if (n_old > 0) {
      old_order = shuffled(sources[1].source->split.train, data::mix_seed(cfg.seed, epoch, 1));
      if (old_order.empty()) throw InvalidInputError("mixed source has no training triplets");
    }
    int64_t n_batches = (static_cast<int64_t>(order.size()) + n_new - 1) / n_new;
    if (cfg.steps_per_epoch > 0) n_batches = std::min(n_batches, cfg.steps_per_epoch);

    double sum_l = 0.0, sum_p = 0.0, sum_s = 0.0;
    size_t next_old = 0;
    uint64_t sample = 0;
    for (int64_t b = 0; b < n_batches; ++b) {
      std::vector<data::Triplet> triplets;
      const size_t begin = static_cast<size_t>(b) * n_new;
      const size_t end = std::min(order.size(), begin + n_new);
      for (size_t i = begin; i < end; ++i) {
        triplets.push_back(data::augment(primary.dataset->triplet(order[i]), cfg.augmentation,
                                         data::mix_seed(cfg.seed, epoch, sample++)));
      }
      for (int i = 0; i < n_old; ++i) {
        const auto& idx = old_order[next_old++ % old_order.size()];
        triplets.push_back(data::augment(sources[1].source->dataset->triplet(idx),
                                         cfg.augmentation,
                                         data::mix_seed(cfg.seed, epoch, sample++)));
      }
      const auto loss = trainer.train_step(collate(triplets));
      sum_l += loss.total_value();
      sum_p += loss.photometric_value();
      sum_s += loss.smoothness_value();
      append_log(log, {{"kind", "step"},
                       {"epoch", epoch},
                       {"step", trainer.step()},
                       {"loss", loss.total_value()},
                       {"photometric", loss.photometric_value()},
                       {"smoothness", loss.smoothness_value()},
                       {"seconds", elapsed()}});
    }

    EpochRecord rec = evaluate_sources(trainer.model().depth, sources, cfg.eval_batch);
    rec.epoch = epoch;
    rec.step = trainer.step();
    rec.loss = sum_l / static_cast<double>(n_batches);
    rec.photometric = sum_p / static_cast<double>(n_batches);
    rec.smoothness = sum_s / static_cast<double>(n_batches);
    rec.seconds = elapsed();

    state.epoch = epoch;
    state.step = trainer.step();
    bool improved = !has_eval;
    if (has_eval) {
      const double delta = rec.eval.at(primary.name).delta[0];
      if (delta > state.best_delta) {
        state.best_delta = delta;
        state.best_epoch = epoch;
        state.epochs_without_improvement = 0;
        improved = true;
      } else {
        ++state.epochs_without_improvement;
      }
    } else {
      state.best_epoch = epoch;
    }
    if (improved) save_checkpoint(result.best_dir, trainer, state);
    save_checkpoint(result.last_dir, trainer, state);
    write_loop_state(result.last_dir / "state.txt", state, rec.seconds);
    append_log(log, epoch_json("epoch", rec));

    result.history.push_back(rec);
    if (options.verbose) print_epoch(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  if (has_eval && state.epochs_without_improvement >= cfg.plateau_patience) {
    result.stopped_on_plateau = true;
  }
  result.best_epoch = state.best_epoch;
  result.best_delta = state.best_delta;
  return result;
}

// Previous epochs of a resumed run, from its log.
TrainResult history_from_log(const fs::path& log) {
  TrainResult result;
  for (const auto& r : read_log(log)) {
    const auto kind = r.at("kind").get<std::string>();
    if (kind == "epoch") result.history.push_back(epoch_from_json(r));
    if (kind == "initial") result.initial = epoch_from_json(r);
  }
  return result;
}

std::vector<Source> make_sources(const TrainSource& first, const TrainSource* second) {
  std::vector<Source> sources;
  for (const TrainSource* s : {&first, second}) {
    if (s == nullptr) continue;
    if (s->dataset == nullptr) throw InvalidInputError(s->name + ": no dataset");
    sources.push_back({s, make_eval_set(*s->dataset, s->split.eval)});
  }
  return sources;
}

void require_resolution(const TrainSource& s, const TrainConfig& cfg) {
  if (s.dataset->width() != cfg.network.width || s.dataset->height() != cfg.network.height) {
    throw ConfigError(s.name + ": dataset resolution " + std::to_string(s.dataset->width()) +
                      "x" + std::to_string(s.dataset->height()) +
                      " differs from the network input " + std::to_string(cfg.network.width) +
                      "x" + std::to_string(cfg.network.height));
  }
}

}  // namespace

TrainResult train(const TrainSource& source, const TrainConfig& cfg, const fs::path& out_dir,
                  const RunOptions& options, torch::Device device) {
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
  if (source.dataset == nullptr) throw InvalidInputError("train: no dataset");
  require_resolution(source, cfg);
  fs::create_directories(out_dir);
  const auto sources = make_sources(source, nullptr);
  const fs::path log = out_dir / "train_log.jsonl";

  if (options.resume && fs::exists(out_dir / "last" / "state.txt")) {
    auto trainer = load_trainer(out_dir / "last", cfg, device);
    const auto state = read_loop_state(out_dir / "last");
    truncate_log(log, state.epoch);
    auto previous = history_from_log(log);
    return run_epochs(trainer, sources, 0.0, state, read_seconds(out_dir / "last"), out_dir,
                      options, std::move(previous));
  }
  fs::remove(log);
  Trainer trainer(cfg, device);
  return run_epochs(trainer, sources, 0.0, LoopState{}, 0.0, out_dir, options, TrainResult{});
}

TrainResult finetune(const fs::path& checkpoint, const TrainSource& target,
                     const TrainSource* previous, double mix_old, const TrainConfig& cfg,
                     const fs::path& out_dir, const RunOptions& options, torch::Device device) {
  for (const auto& w : cfg.validate()) std::cerr << "warning: " << w << '\n';
  if (!(mix_old >= 0.0 && mix_old < 1.0)) throw ConfigError("mix_old must lie in [0, 1)");
  if (mix_old > 0.0 && previous == nullptr) {
    throw ConfigError("mix_old > 0 needs the previous dataset");
  }
  if (target.dataset == nullptr) throw InvalidInputError("finetune: no dataset");
  require_resolution(target, cfg);
  if (previous != nullptr) require_resolution(*previous, cfg);
  check_network_match(cfg.network, read_checkpoint_config(checkpoint).network,
                      checkpoint.string());
  fs::create_directories(out_dir);
  const fs::path log = out_dir / "train_log.jsonl";

  TrainResult result;
  result.best_dir = out_dir / "best";
  result.last_dir = out_dir / "last";
  if (cfg.max_epochs == 0) {
    for (const auto& dir : {result.best_dir, result.last_dir}) {
      fs::remove_all(dir);
      fs::copy(checkpoint, dir, fs::copy_options::recursive);
    }
    return result;
  }

  const auto sources = make_sources(target, previous);
  if (options.resume && fs::exists(out_dir / "last" / "state.txt")) {
    auto trainer = load_trainer(out_dir / "last", cfg, device);
    const auto state = read_loop_state(out_dir / "last");
    truncate_log(log, state.epoch);
    return run_epochs(trainer, sources, mix_old, state, read_seconds(out_dir / "last"),
                      out_dir, options, history_from_log(log));
  }

  fs::remove(log);
  auto trainer = load_trainer(checkpoint, cfg, device);
  trainer.set_step(0);
  EpochRecord initial = evaluate_sources(trainer.model().depth, sources, cfg.eval_batch);
  append_log(log, epoch_json("initial", initial));
  if (options.verbose) print_epoch(initial);
  result.initial = initial;
  LoopState state;
  return run_epochs(trainer, sources, mix_old, state, 0.0, out_dir, options, result);
}

std::vector<std::array<double, 4>> read_step_log(const fs::path& log) {
  if (!fs::exists(log)) throw IoError("missing training log " + log.string());
  std::vector<std::array<double, 4>> rows;
  for (const auto& r : read_log(log)) {
    if (r.at("kind") != "step") continue;
    rows.push_back({r.at("step").get<double>(), r.at("loss").get<double>(),
                    r.at("photometric").get<double>(), r.at("smoothness").get<double>()});
  }
  return rows;
}

// --- inference ---------------------------------------------------------------------

torch::Tensor infer(networks::DepthNet& net, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw ShapeError("infer expects a [3, H, W] image");
  const auto& cfg = net->config();
  const auto resized = io::resize_image(image, cfg.width, cfg.height);
  if (resized.size(1) != cfg.height || resized.size(2) != cfg.width) {
    throw ShapeError("resized image does not match the network input");
  }
  const auto device = net->parameters().front().device();
  return predict_depth(net, resized.unsqueeze(0).to(device))[0][0].to(torch::kCPU);
}

Throughput measure_throughput(networks::DepthNet& net, int batch, int repeats) {
  if (batch < 1 || repeats < 1) throw InvalidInputError("batch and repeats must be >= 1");
  const auto& cfg = net->config();
  const auto device = net->parameters().front().device();
  const auto images = torch::rand({batch, 3, cfg.height, cfg.width}, torch::TensorOptions().device(device));
  predict_depth(net, images.narrow(0, 0, 1));  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) predict_depth(net, images);
  Throughput t;
  t.images = static_cast<int64_t>(batch) * repeats;
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return t;
}

}  // namespace aerodepth::training
