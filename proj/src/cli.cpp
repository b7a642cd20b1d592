#include "aerodepth/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <opencv2/core/version.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "aerodepth/config.hpp"
#include "aerodepth/data.hpp"
#include "aerodepth/errors.hpp"
#include "aerodepth/evaluation.hpp"
#include "aerodepth/image_io.hpp"
#include "aerodepth/synthcam.hpp"
#include "aerodepth/training.hpp"

namespace aerodepth::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

torch::Tensor colorize_depth(const torch::Tensor& depth) {
  if (depth.dim() != 2) throw ShapeError("colorize expects an [H, W] depth map");
  const auto d = depth.to(torch::kFloat64);
  const auto valid = torch::isfinite(d) & (d > 0.0);
  auto rgb = torch::zeros({3, d.size(0), d.size(1)}, torch::kFloat32);
  if (!valid.any().item<bool>()) return rgb;

  const auto inv = torch::where(valid, 1.0 / d, torch::zeros_like(d));
  const double near = inv.masked_select(valid).max().item<double>();
  const double far = inv.masked_select(valid).min().item<double>();
  // t = 1 at the nearest depth, 0 at the farthest.
  const auto t = near > far ? (inv - far) / (near - far) : torch::full_like(d, 0.5);
  const auto upper = t >= 0.5;
  const auto r = torch::where(upper, torch::ones_like(t), 2.0 * t);
  const auto g = torch::where(upper, 2.0 * t - 1.0, torch::zeros_like(t));
  const auto b = torch::where(upper, torch::zeros_like(t), 1.0 - 2.0 * t);
  rgb = torch::stack({r, g, b}).clamp(0.0, 1.0) * valid.unsqueeze(0);
  return rgb.to(torch::kFloat32);
}

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<int64_t> seed;
  std::string out;
};

config::KeyValueConfig load_config(const Common& c) {
  auto cfg = c.config_path.empty() ? config::KeyValueConfig{}
                                   : config::KeyValueConfig::read(c.config_path);
  for (const auto& o : c.overrides) cfg.set(o);
  if (c.seed) cfg.set("train.seed", std::to_string(*c.seed));
  return cfg;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

// run.json: everything needed to repeat the command.
void write_run_manifest(const fs::path& out_dir, const std::string& command,
                        const std::vector<std::string>& argv, const config::KeyValueConfig& cfg,
                        const json& extra = json::object()) {
  fs::create_directories(out_dir);
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["started"] = timestamp();
  j["config"] = cfg.values();
  j["seed"] = cfg.get_int("train.seed", 0);
  j["versions"] = {{"aerodepth", "1.0.0"},
                   {"torch", TORCH_VERSION},
                   {"opencv", CV_VERSION},
                   {"compiler", __VERSION__}};
  j["device"] = training::default_device().str();
  for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(out_dir / "run.json");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + (out_dir / "run.json").string());
}

void print_report(const std::string& name, const evaluation::EvalReport& r) {
  std::cout << name << ": rmse " << r.rmse << "  l1_rel " << r.l1_rel << "  d1.25 "
            << r.delta[0] << "  d1.15 " << r.delta[1] << "  d1.05 " << r.delta[2] << '\n';
}

torch::Tensor load_depth_any(const fs::path& path) {
  return evaluation::load_ground_truth(path).depth.to(torch::kFloat32);
}

data::Dataset load_dataset(const fs::path& manifest, const training::TrainConfig& cfg) {
  return data::Dataset::from_manifest(manifest, cfg.network.width, cfg.network.height);
}

// --- subcommands --------------------------------------------------------------

int cmd_synth(const Common& c, const std::string& preset, int width, int height, int frames,
              const std::vector<std::string>& argv) {
  auto cfg = load_config(c);
  std::vector<synthcam::SceneSpec> specs;
  const auto chosen = cfg.get_string("scene.preset", preset);
  if (!chosen.empty()) {
    const int w = static_cast<int>(cfg.get_int("scene.width", width));
    const int h = static_cast<int>(cfg.get_int("scene.height", height));
    const int n = static_cast<int>(cfg.get_int("scene.frames", frames));
    specs = synthcam::preset(chosen, w, h, n);
  } else {
    specs.push_back(synthcam::scene_from_config(cfg));
  }
  cfg.reject_unused();
  const fs::path out = c.out.empty() ? fs::path("synth") : fs::path(c.out);
  const auto manifest = synthcam::make_benchmark(specs, out);
  size_t frames_written = 0;
  for (const auto& s : specs) frames_written += s.frame_count;
  write_run_manifest(out, "synth", argv, cfg);
  std::cout << "wrote " << manifest.sequences.size() << " sequence(s), " << frames_written
            << " frames, manifest " << (out / "manifest.txt").string() << '\n';
  return 0;
}

int cmd_prepare(const Common& c, const std::string& images, const std::string& intrinsics,
                const std::string& depth, const std::string& name, int offset,
                const std::vector<std::string>& argv) {
  auto cfg = load_config(c);
  cfg.reject_unused();
  const fs::path manifest_path = c.out.empty() ? fs::path("manifest.txt") : fs::path(c.out);
  data::DatasetManifest manifest;
  if (fs::exists(manifest_path)) manifest = data::DatasetManifest::read(manifest_path);
  data::SequenceEntry entry{name.empty() ? fs::path(images).filename().string() : name,
                            fs::absolute(images), fs::absolute(intrinsics), offset,
                            depth.empty() ? fs::path() : fs::absolute(depth)};
  const auto seq = data::load_sequence(entry);
  const auto triplets = data::sample_triplets(seq, offset);
  std::erase_if(manifest.sequences, [&](const auto& e) { return e.name == entry.name; });
  manifest.sequences.push_back(entry);
  if (manifest_path.has_parent_path()) fs::create_directories(manifest_path.parent_path());
  manifest.write(manifest_path);
  write_run_manifest(manifest_path.parent_path().empty() ? fs::path(".")
                                                         : manifest_path.parent_path(),
                     "prepare", argv, cfg);
  std::cout << entry.name << ": " << seq.frames.size() << " frames, " << triplets.size()
            << " triplets at offset " << offset << " -> " << manifest_path.string() << '\n';
  return 0;
}

int cmd_train(const Common& c, const std::string& data_path, bool fresh,
              const std::vector<std::string>& argv) {
  auto cfg_kv = load_config(c);
  const auto cfg = training::train_config_from(cfg_kv);
  cfg_kv.reject_unused();
  const fs::path out = c.out.empty() ? fs::path("run") : fs::path(c.out);
  const auto dataset = load_dataset(data_path, cfg);
  training::TrainSource source{"eval", &dataset, training::split_for(dataset, cfg)};
  std::cout << "train " << source.split.train.size() << " / eval " << source.split.eval.size()
            << " / guard " << source.split.guard.size() << " triplets\n";
  auto effective = training::to_key_values(cfg);
  write_run_manifest(out, "train", argv, effective, {{"data", fs::absolute(data_path)}});
  training::RunOptions options;
  options.resume = !fresh;
  options.verbose = true;
  const auto result = training::train(source, cfg, out, options, training::default_device());
  std::cout << "best epoch " << result.best_epoch << " (delta 1.25 = " << result.best_delta
            << ")" << (result.stopped_on_plateau ? ", stopped on plateau" : "") << '\n';
  return 0;
}

int cmd_finetune(const Common& c, const std::string& checkpoint, const std::string& data_path,
                 const std::string& old_data, double mix, bool fresh,
                 const std::vector<std::string>& argv) {
  auto cfg_kv = load_config(c);
  const auto cfg = training::train_config_from(cfg_kv, training::read_checkpoint_config(checkpoint));
  cfg_kv.reject_unused();
  const fs::path out = c.out.empty() ? fs::path("finetune") : fs::path(c.out);
  const auto target_data = load_dataset(data_path, cfg);
  training::TrainSource target{"new", &target_data, training::split_for(target_data, cfg)};
  std::optional<data::Dataset> old_dataset;
  std::optional<training::TrainSource> previous;
  if (!old_data.empty()) {
    old_dataset = load_dataset(old_data, cfg);
    previous = training::TrainSource{"old", &*old_dataset, training::split_for(*old_dataset, cfg)};
  }
  write_run_manifest(out, "finetune", argv, training::to_key_values(cfg),
                     {{"checkpoint", fs::absolute(checkpoint)},
                      {"data", fs::absolute(data_path)},
                      {"old_data", old_data.empty() ? "" : fs::absolute(old_data).string()},
                      {"mix_old", mix}});
  training::RunOptions options;
  options.resume = !fresh;
  options.verbose = true;
  const auto result = training::finetune(checkpoint, target, previous ? &*previous : nullptr,
                                         mix, cfg, out, options, training::default_device());
  std::cout << "best epoch " << result.best_epoch << " (delta 1.25 = " << result.best_delta
            << ")\n";
  return 0;
}

int cmd_infer(const Common& c, const std::string& checkpoint, const std::string& image,
              int benchmark, const std::vector<std::string>& argv) {
  auto cfg = load_config(c);
  cfg.reject_unused();
  const fs::path out = c.out.empty() ? fs::path("infer") : fs::path(c.out);
  networks::NetworkConfig network;
  auto net = training::load_depth_network(checkpoint, &network, training::default_device());
  write_run_manifest(out, "infer", argv, cfg,
                     {{"checkpoint", fs::absolute(checkpoint)}, {"image", image}});
  std::cout << "depth network: " << networks::count_parameters(*net) << " parameters\n";
  if (!image.empty()) {
    const auto depth = training::infer(net, io::read_image(image));
    const auto stem = fs::path(image).stem().string();
    evaluation::write_depth_file(out / (stem + ".depth"), depth);
    io::write_image(out / (stem + "_depth.png"), colorize_depth(depth));
    std::cout << "wrote " << (out / (stem + ".depth")).string() << " and "
              << (out / (stem + "_depth.png")).string() << '\n';
  }
  if (benchmark > 0) {
    const auto t = training::measure_throughput(net, benchmark);
    std::cout << "throughput: " << t.images << " images at " << network.width << "x"
              << network.height << " in " << t.seconds << " s = " << t.fps() << " fps\n";
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data_path,
             bool all, const std::vector<std::string>& argv) {
  auto cfg_kv = load_config(c);
  const auto cfg = training::train_config_from(cfg_kv, training::read_checkpoint_config(checkpoint));
  cfg_kv.reject_unused();
  const fs::path out = c.out.empty() ? fs::path("eval") : fs::path(c.out);
  auto net = training::load_depth_network(checkpoint, nullptr, training::default_device());
  const auto dataset = load_dataset(data_path, cfg);
  const auto triplets = all ? dataset.triplets() : training::split_for(dataset, cfg).eval;
  const auto samples = training::make_eval_set(dataset, triplets);
  if (samples.empty()) throw InvalidInputError("no frames with ground truth to evaluate");

  std::vector<evaluation::ReportRow> rows;
  std::vector<evaluation::EvalReport> reports;
  for (const auto& s : samples) {
    const auto one = std::span<const training::EvalSample>(&s, 1);
    reports.push_back(training::evaluate_model(net, one, 1));
    rows.push_back({dataset.sequence(s.source.sequence).id + ":" +
                        std::to_string(dataset.sequence(s.source.sequence)
                                           .frames.at(s.source.center)
                                           .index),
                    reports.back()});
  }
  const auto mean = evaluation::mean_report(reports);
  rows.push_back({"mean", mean});
  write_run_manifest(out, "eval", argv, training::to_key_values(cfg),
                     {{"checkpoint", fs::absolute(checkpoint)},
                      {"data", fs::absolute(data_path)},
                      {"frames", all ? "all" : "eval split"}});
  evaluation::write_report_csv(out / "report.csv", rows);
  print_report("mean over " + std::to_string(samples.size()) + " images", mean);
  std::cout << "wrote " << (out / "report.csv").string() << '\n';
  return 0;
}

int cmd_colorize(const Common& c, const std::string& depth) {
  auto cfg = load_config(c);
  cfg.reject_unused();
  fs::path out = c.out.empty() ? fs::path(depth).replace_extension(".color.png") : fs::path(c.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  io::write_image(out, colorize_depth(load_depth_any(depth)));
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Self-supervised monocular depth for aerial image sequences", "aerodepth"};
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value config file with [sections]")
        ->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "override, section.key=value (repeatable)");
    sub->add_option("--seed", common.seed, "random seed (train.seed)");
    sub->add_option("--out", common.out, "output directory (file for prepare/colorize)");
  };

  std::string preset, spec;
  int width = 192, height = 96, frames = 30;
  auto* synth = app.add_subcommand("synth", "render a synthetic benchmark with exact depth");
  add_common(synth);
  synth->add_option("--preset", preset, "demo, desk, A, B or AB");
  synth->add_option("--spec", spec, "scene description file ([scene] section)")
      ->check(CLI::ExistingFile);
  synth->add_option("--width", width, "image width for presets");
  synth->add_option("--height", height, "image height for presets");
  synth->add_option("--frames", frames, "frames per sequence for presets");

  std::string images, intrinsics, depth_dir, name;
  int offset = 1;
  auto* prepare = app.add_subcommand(
      "prepare", "register a directory of numbered frames in a dataset manifest");
  add_common(prepare);
  prepare->add_option("--images", images, "directory of numbered image files")
      ->required()
      ->check(CLI::ExistingDirectory);
  prepare->add_option("--intrinsics", intrinsics, "intrinsics file")
      ->required()
      ->check(CLI::ExistingFile);
  prepare->add_option("--depth", depth_dir, "optional ground-truth depth directory")
      ->check(CLI::ExistingDirectory);
  prepare->add_option("--name", name, "sequence name (default: directory name)");
  prepare->add_option("--offset", offset, "frame spacing of training triplets");

  std::string data_path, checkpoint, old_data, image, depth_file;
  bool fresh = false, all = false;
  double mix = 0.0;
  int benchmark = 0;
  auto* train = app.add_subcommand("train", "train depth and pose networks from scratch");
  add_common(train);
  train->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_flag("--fresh", fresh, "ignore an existing checkpoint in --out");

  auto* finetune = app.add_subcommand("finetune", "continue training on a new sequence");
  add_common(finetune);
  finetune->add_option("--checkpoint", checkpoint, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  finetune->add_option("--data", data_path, "manifest of the new data")
      ->required()
      ->check(CLI::ExistingFile);
  finetune->add_option("--old-data", old_data, "manifest of the previous training data")
      ->check(CLI::ExistingFile);
  finetune->add_option("--mix", mix, "fraction of each batch drawn from --old-data")
      ->check(CLI::Range(0.0, 0.99));
  finetune->add_flag("--fresh", fresh, "ignore an existing checkpoint in --out");

  auto* infer = app.add_subcommand("infer", "predict depth for an image (depth network only)");
  add_common(infer);
  infer->add_option("--checkpoint", checkpoint, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  infer->add_option("--image", image, "input image")->check(CLI::ExistingFile);
  infer->add_option("--benchmark", benchmark, "time a batch of this many images");

  auto* eval = app.add_subcommand("eval", "accuracy against ground truth");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--data", data_path, "dataset manifest")->required()->check(CLI::ExistingFile);
  eval->add_flag("--all", all, "evaluate every centre frame, not only the held-out split");

  auto* colorize = app.add_subcommand("colorize", "render a depth file as a colour image");
  add_common(colorize);
  colorize->add_option("--depth", depth_file, ".depth file or 16-bit PNG")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      if (!spec.empty()) common.config_path = spec;
      if (preset.empty() && common.config_path.empty()) {
        std::cerr << "synth needs --preset or --spec\n" << synth->help();
        return 2;
      }
      return cmd_synth(common, preset, width, height, frames, args);
    }
    if (*prepare) return cmd_prepare(common, images, intrinsics, depth_dir, name, offset, args);
    if (*train) return cmd_train(common, data_path, fresh, args);
    if (*finetune) {
      if (mix > 0.0 && old_data.empty()) {
        std::cerr << "--mix needs --old-data\n";
        return 2;
      }
      return cmd_finetune(common, checkpoint, data_path, old_data, mix, fresh, args);
    }
    if (*infer) {
      if (image.empty() && benchmark == 0) {
        std::cerr << "infer needs --image or --benchmark\n";
        return 2;
      }
      return cmd_infer(common, checkpoint, image, benchmark, args);
    }
    if (*eval) return cmd_eval(common, checkpoint, data_path, all, args);
    if (*colorize) return cmd_colorize(common, depth_file);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace aerodepth::cli
