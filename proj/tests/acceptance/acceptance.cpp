// Acceptance gate: one PASS/FAIL line per criterion.
//
// Criteria 5 and 6 train real models. Their runs live under the work
// directory and resume from the last completed epoch, so a finished run is
// only re-read and re-evaluated.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aerodepth/evaluation.hpp"
#include "aerodepth/geometry.hpp"
#include "aerodepth/losses.hpp"
#include "aerodepth/networks.hpp"
#include "aerodepth/synthcam.hpp"
#include "aerodepth/training.hpp"
#include "support/oracles.hpp"

using namespace aerodepth;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// --- pinned tolerances and budgets ---------------------------------------------

constexpr double kGeometryTolerance = 1e-9;
constexpr double kGeometrySeconds = 60.0;
constexpr double kGradientTolerance = 1e-3;
constexpr double kGradientSeconds = 300.0;
constexpr int kOptimalityTrials = 100;
constexpr int kOptimalityRequired = 95;
constexpr double kDepthPerturbation = 0.10;
constexpr double kScaleInvarianceTolerance = 1e-6;
constexpr int kMetricPairs = 1000;
constexpr double kMetricRelativeTolerance = 1e-12;

constexpr int kDeskWidth = 192;
constexpr int kDeskHeight = 96;
constexpr int kDeskFrames = 140;
constexpr int kDeskEpochs = 50;
constexpr double kDeskTarget = 0.85;
// Batched and single-image evaluation may differ in the last float bits.
constexpr double kEvalConsistency = 1e-3;

constexpr int kSceneWidth = 128;
constexpr int kSceneHeight = 64;
constexpr int kSceneFrames = 200;
constexpr int kSceneEpochs = 40;
constexpr double kTransferDrop = 0.10;
constexpr double kRecoveryGap = 0.05;
constexpr double kFinetuneEpochFraction = 0.10;
constexpr double kMixedForgetting = 0.03;

constexpr double kModelSizeTolerance = 0.15;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(1) << v;
  return s.str();
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

// --- 1: geometry -----------------------------------------------------------------

torch::Tensor transform_points(const torch::Tensor& points, const geometry::PoseSE3& pose) {
  const Eigen::Matrix4d m = pose.matrix();
  const auto flat = points.view({3, -1});
  std::vector<torch::Tensor> rows;
  for (int r = 0; r < 3; ++r) {
    rows.push_back(m(r, 0) * flat[0] + m(r, 1) * flat[1] + m(r, 2) * flat[2] + m(r, 3));
  }
  return torch::stack(rows).view(points.sizes());
}

geometry::PoseSE3 random_pose(std::mt19937_64& rng, double rot, double trans) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  geometry::PoseSE3 p;
  for (auto& r : p.rotation) r = rot * u(rng);
  for (auto& t : p.translation) t = trans * u(rng);
  return p;
}

Outcome geometry_suite() {
  const auto start = Clock::now();
  const geometry::CameraIntrinsics cam{20, 18, 7.5, 5.5, 16, 12};
  const double k[4] = {cam.fx, cam.fy, cam.cx, cam.cy};
  std::mt19937_64 rng(1);
  torch::manual_seed(1);
  double identity_err = 0, oracle_err = 0, round_trip_err = 0, compose_err = 0;
  bool masks_equal = true;

  for (int trial = 0; trial < 50; ++trial) {
    const auto source = torch::rand({1, 3, 12, 16}, torch::kFloat64);
    const auto depth = torch::rand({1, 1, 12, 16}, torch::kFloat64) * 4 + 1;

    const auto id = geometry::project_and_sample(source, depth, geometry::PoseSE3{}, cam);
    identity_err = std::max(identity_err, max_abs(id.image - source));
    masks_equal &= id.valid.all().item<bool>();

    const auto pose = random_pose(rng, 0.2, 0.5);
    const double six[6] = {pose.rotation[0],    pose.rotation[1],    pose.rotation[2],
                           pose.translation[0], pose.translation[1], pose.translation[2]};
    const auto expected = oracle::warp(source[0], depth[0][0], six, k);
    const auto got = geometry::project_and_sample(source, depth, pose, cam);
    oracle_err = std::max(oracle_err, max_abs(got.image[0] - expected.image));
    masks_equal &= torch::equal(got.valid[0][0], expected.valid);

    const auto moved = transform_points(geometry::backproject(depth, cam)[0], pose).unsqueeze(0);
    const auto back = geometry::project(moved, pose.inverse(), cam);
    round_trip_err = std::max(round_trip_err,
                              max_abs(back.coords - geometry::pixel_grid(1, 12, 16, torch::kFloat64)));

    const auto second = random_pose(rng, 0.2, 0.5);
    const auto pts = geometry::backproject(depth, cam)[0];
    const auto chained = transform_points(transform_points(pts, pose), second);
    const auto composed = transform_points(pts, second.compose(pose));
    compose_err = std::max(compose_err, max_abs(chained - composed));
    const auto batched = geometry::pose_to_matrix(
        torch::stack({pose.to_tensor(torch::kFloat64), second.to_tensor(torch::kFloat64)}));
    const auto product = batched[1].matmul(batched[0]);
    Eigen::Matrix4d composed_matrix = second.compose(pose).matrix();
    const auto direct = torch::from_blob(composed_matrix.data(), {4, 4}, torch::kFloat64).t();
    compose_err = std::max(compose_err, max_abs(product - direct));
  }
  const double seconds = seconds_since(start);
  const double worst = std::max({identity_err, oracle_err, round_trip_err, compose_err});
  return {worst < kGeometryTolerance && masks_equal && seconds < kGeometrySeconds,
          "identity " + sci(identity_err) + ", oracle " + sci(oracle_err) + ", round trip " +
              sci(round_trip_err) + ", composition " + sci(compose_err) +
              (masks_equal ? ", masks equal" : ", MASKS DIFFER") + " (tol 1e-9, " +
              fmt(seconds, 1) + " s)"};
}

// --- 2: gradients ----------------------------------------------------------------

Outcome gradient_suite() {
  const auto start = Clock::now();
  torch::manual_seed(2);
  constexpr int64_t h = 12, w = 16;
  const auto k = torch::tensor({14.0, 13.0, 7.5, 5.5}, torch::kFloat64);
  const auto pose = torch::tensor({{0.02, -0.03, 0.01, 0.15, -0.05, 0.03}}, torch::kFloat64);
  const auto source = torch::rand({1, 3, h, w}, torch::kFloat64);
  const auto weights = torch::rand({1, 3, h, w}, torch::kFloat64);
  const auto depth = torch::rand({1, 1, h, w}, torch::kFloat64) * 2 + 2;
  const auto a = torch::rand({1, 3, h, w}, torch::kFloat64);
  const auto b = (a + 0.1 * torch::randn_like(a)).clamp(0.05, 0.95);

  auto warp_sum = [&](const torch::Tensor& s, const torch::Tensor& d, const torch::Tensor& p) {
    return (geometry::project_and_sample(s, d, p, k).image * weights).sum();
  };
  std::vector<std::pair<std::string, double>> errors;
  errors.emplace_back("warp/depth", oracle::gradient_error(
                                        [&](const torch::Tensor& d) { return warp_sum(source, d, pose); }, depth));
  errors.emplace_back("warp/pose", oracle::gradient_error(
                                       [&](const torch::Tensor& p) { return warp_sum(source, depth, p); }, pose));
  errors.emplace_back("warp/source", oracle::gradient_error(
                                         [&](const torch::Tensor& s) { return warp_sum(s, depth, pose); }, source));
  errors.emplace_back("ssim", oracle::gradient_error(
                                  [&](const torch::Tensor& x) { return (losses::ssim(x, b) * weights).sum(); }, a));
  errors.emplace_back("photometric",
                      oracle::gradient_error(
                          [&](const torch::Tensor& x) {
                            return (losses::photometric_error(x, b) * weights.narrow(1, 0, 1)).sum();
                          },
                          a));
  errors.emplace_back("smoothness", oracle::gradient_error(
                                        [&](const torch::Tensor& d) { return losses::smoothness_loss(d, a); }, depth));

  training::Batch batch;
  batch.left = torch::rand({1, 3, h, w}, torch::kFloat64);
  batch.ref = torch::rand({1, 3, h, w}, torch::kFloat64);
  batch.right = torch::rand({1, 3, h, w}, torch::kFloat64);
  batch.intrinsics = k.unsqueeze(0);
  networks::NetworkConfig net;
  losses::LossWeights lw;
  lw.smoothness = 0.1;
  const auto fine = torch::rand({1, 1, h, w}, torch::kFloat64) * 0.2 + 0.05;
  const auto coarse = torch::rand({1, 1, h / 2, w / 2}, torch::kFloat64) * 0.2 + 0.05;
  auto poses = torch::zeros({1, 2, 6}, torch::kFloat64);
  poses[0][0] = pose[0];
  poses[0][1] = -pose[0];
  errors.emplace_back("total/depth", oracle::gradient_error(
                                         [&](const torch::Tensor& s) {
                                           const std::vector<torch::Tensor> maps{s, coarse};
                                           return training::reconstruction_loss(batch, maps, poses, net, lw).total;
                                         },
                                         fine));
  errors.emplace_back("total/pose", oracle::gradient_error(
                                        [&](const torch::Tensor& p) {
                                          const std::vector<torch::Tensor> maps{fine, coarse};
                                          return training::reconstruction_loss(batch, maps, p, net, lw).total;
                                        },
                                        poses));

  const double seconds = seconds_since(start);
  double worst = 0;
  std::string detail;
  for (const auto& [name, err] : errors) {
    worst = std::max(worst, err);
    detail += name + " " + sci(err) + ", ";
  }
  return {worst < kGradientTolerance && seconds < kGradientSeconds,
          detail + "max " + sci(worst) + " (tol 1e-3, " + fmt(seconds, 1) + " s)"};
}

// --- 3: loss optimality ---------------------------------------------------------------

Outcome loss_optimality() {
  // 100 triplets: four sequences of 27 frames over the training town.
  const auto specs = synthcam::preset("desk", kDeskWidth, kDeskHeight, 27);
  int trials = 0, wins = 0;
  double worst_margin = 1e9;
  for (const auto& spec : specs) {
    const auto seq = synthcam::render_sequence(spec);
    const auto k = spec.intrinsics.to_tensor(torch::kFloat64);
    for (int c = 1; c + 1 < spec.frame_count && trials < kOptimalityTrials; ++c, ++trials) {
      const auto ref = seq.images[c].unsqueeze(0).to(torch::kFloat64);
      const auto depth = seq.depths[c].unsqueeze(0).unsqueeze(0).to(torch::kFloat64);
      auto lp = [&](double scale) {
        std::vector<losses::WarpedView> views;
        for (int v : {c - 1, c + 1}) {
          const auto rel = synthcam::relative_pose(seq.camera_to_world[c], seq.camera_to_world[v]);
          const auto warped = geometry::project_and_sample(
              seq.images[v].unsqueeze(0).to(torch::kFloat64), depth * scale,
              rel.to_tensor(torch::kFloat64).unsqueeze(0), k);
          views.push_back({warped.image, warped.valid});
        }
        return losses::min_reprojection_loss(ref, views).item<double>();
      };
      const double exact = lp(1.0);
      const double perturbed = std::min(lp(1.0 + kDepthPerturbation), lp(1.0 - kDepthPerturbation));
      wins += exact < perturbed ? 1 : 0;
      worst_margin = std::min(worst_margin, perturbed - exact);
    }
  }

  torch::manual_seed(3);
  double invariance = 0;
  for (int i = 0; i < 20; ++i) {
    const auto d = torch::rand({2, 1, 24, 32}, torch::kFloat64) * 10 + 0.5;
    const auto img = torch::rand({2, 3, 24, 32}, torch::kFloat64);
    const double base = losses::smoothness_loss(d, img).item<double>();
    for (double s : {1e-3, 0.37, 4.2, 1e3}) {
      invariance = std::max(invariance,
                            std::abs(losses::smoothness_loss(d * s, img).item<double>() - base) / base);
    }
  }
  return {trials == kOptimalityTrials && wins >= kOptimalityRequired &&
              invariance < kScaleInvarianceTolerance,
          "exact depth wins " + std::to_string(wins) + "/" + std::to_string(trials) +
              " against +-10% (need 95, smallest margin " + fmt(worst_margin, 6) +
              "); smoothness scale invariance " + sci(invariance) + " (tol 1e-6)"};
}

// --- 4: metric oracle -----------------------------------------------------------------

std::vector<double> as_vector(const torch::Tensor& t) {
  const auto c = t.to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

Outcome metric_oracle() {
  torch::manual_seed(4);
  int mismatches = 0, monotone_violations = 0;
  for (int i = 0; i < kMetricPairs; ++i) {
    const auto gt = torch::rand({8, 8}, torch::kFloat64) * 80 + 0.5;
    const auto pred = gt * torch::exp(0.25 * torch::randn({8, 8}, torch::kFloat64));
    auto valid = torch::rand({8, 8}) < 0.85;
    valid.index_put_({i % 8, (i / 8) % 8}, true);
    const auto r = evaluation::compute_metrics(pred, gt, valid);
    const auto vb = valid.contiguous();
    const std::vector<bool> mask(vb.data_ptr<bool>(), vb.data_ptr<bool>() + vb.numel());
    const auto o = oracle::metrics(as_vector(pred), as_vector(gt), mask);
    bool same = r.valid_pixels == o.m &&
                std::abs(r.rmse - o.rmse) <= kMetricRelativeTolerance * o.rmse &&
                std::abs(r.l1_rel - o.l1_rel) <= kMetricRelativeTolerance * o.l1_rel;
    for (int t = 0; t < 3; ++t) same &= r.delta[t] == static_cast<double>(o.count[t]) / o.m;
    mismatches += same ? 0 : 1;
    monotone_violations += (r.delta[2] <= r.delta[1] && r.delta[1] <= r.delta[0]) ? 0 : 1;
  }
  return {mismatches == 0 && monotone_violations == 0,
          std::to_string(kMetricPairs - mismatches) + "/" + std::to_string(kMetricPairs) +
              " pairs match the oracle (deltas exact, rmse/l1_rel to 1e-12 relative), " +
              std::to_string(monotone_violations) + " monotonicity violations"};
}

// --- shared training helpers ----------------------------------------------------------

data::Dataset ensure_benchmark(const fs::path& dir, const std::vector<synthcam::SceneSpec>& specs,
                               int width, int height) {
  std::cout << "  rendering " << dir.string() << std::endl;
  fs::remove_all(dir);
  synthcam::make_benchmark(specs, dir);
  return data::Dataset::from_manifest(dir / "manifest.txt", width, height);
}

training::TrainConfig config_for(int width, int height, int epochs) {
  training::TrainConfig cfg;
  cfg.network.width = width;
  cfg.network.height = height;
  cfg.max_epochs = epochs;
  return cfg;
}

training::RunOptions verbose_resume() {
  training::RunOptions o;
  o.resume = true;
  o.verbose = true;
  return o;
}

double delta_of(networks::DepthNet& net, std::span<const training::EvalSample> samples) {
  return training::evaluate_model(net, samples).delta[0];
}

// Re-scores a depth network with the brute-force oracle: per image median
// scaling and metrics over valid ground truth, averaged over images.
double oracle_delta(networks::DepthNet& net, std::span<const training::EvalSample> samples,
                    bool constant_prediction = false) {
  double sum = 0.0;
  for (const auto& s : samples) {
    torch::Tensor pred;
    if (constant_prediction) {
      pred = torch::ones_like(s.truth.depth);
    } else {
      pred = training::predict_depth(net, s.image.unsqueeze(0))[0][0].to(torch::kFloat64);
    }
    const auto gt = as_vector(s.truth.depth);
    const auto p = as_vector(pred);
    const auto vb = s.truth.valid.contiguous();
    const std::vector<bool> mask(vb.data_ptr<bool>(), vb.data_ptr<bool>() + vb.numel());
    std::vector<double> gv, pv;
    for (size_t i = 0; i < gt.size(); ++i) {
      if (!mask[i]) continue;
      gv.push_back(gt[i]);
      pv.push_back(p[i]);
    }
    const double ratio = oracle::median(gv) / oracle::median(pv);
    std::vector<double> scaled(p.size());
    for (size_t i = 0; i < p.size(); ++i) scaled[i] = p[i] * ratio;
    const auto m = oracle::metrics(scaled, gt, mask);
    sum += static_cast<double>(m.count[0]) / m.m;
  }
  return sum / static_cast<double>(samples.size());
}

// --- 5: desk-scale training ---------------------------------------------------------------

Outcome desk_training(const fs::path& work) {
  const auto dataset = ensure_benchmark(work / "desk",
                                        synthcam::preset("desk", kDeskWidth, kDeskHeight, kDeskFrames),
                                        kDeskWidth, kDeskHeight);
  const auto cfg = config_for(kDeskWidth, kDeskHeight, kDeskEpochs);
  const training::TrainSource source{"eval", &dataset, training::split_for(dataset, cfg)};
  const auto result = training::train(source, cfg, work / "desk_run", verbose_resume());

  auto net = training::load_depth_network(result.best_dir);
  const auto samples = training::make_eval_set(dataset, source.split.eval);
  const double library = delta_of(net, samples);
  const double independent = oracle_delta(net, samples);
  const double baseline = oracle_delta(net, samples, true);
  const auto triplets = dataset.triplets().size();
  const bool consistent = std::abs(library - result.best_delta) < kEvalConsistency &&
                          std::abs(library - independent) < kEvalConsistency;
  return {triplets >= 500 && consistent && independent >= kDeskTarget &&
              result.best_epoch <= kDeskEpochs,
          "best eval delta1.25 " + fmt(independent) + " at epoch " +
              std::to_string(result.best_epoch) + " of " + std::to_string(result.history.size()) +
              " (target 0.85, " + std::to_string(triplets) + " triplets, " +
              std::to_string(samples.size()) + " held-out images, constant-depth baseline " +
              fmt(baseline) + (consistent ? "" : ", LOG/ORACLE MISMATCH") + ")"};
}

// --- 6: transfer and fine-tuning -------------------------------------------------------------

Outcome finetuning(const fs::path& work) {
  const auto a_data = ensure_benchmark(work / "sceneA",
                                       synthcam::preset("A", kSceneWidth, kSceneHeight, kSceneFrames),
                                       kSceneWidth, kSceneHeight);
  const auto b_data = ensure_benchmark(work / "sceneB",
                                       synthcam::preset("B", kSceneWidth, kSceneHeight, kSceneFrames),
                                       kSceneWidth, kSceneHeight);
  auto cfg = config_for(kSceneWidth, kSceneHeight, kSceneEpochs);
  const training::TrainSource a{"A", &a_data, training::split_for(a_data, cfg)};
  const training::TrainSource b{"B", &b_data, training::split_for(b_data, cfg)};
  const auto a_eval = training::make_eval_set(a_data, a.split.eval);
  const auto b_eval = training::make_eval_set(b_data, b.split.eval);

  std::cout << "  scene A from scratch" << std::endl;
  const auto a_run = training::train(a, cfg, work / "A_run", verbose_resume());
  std::cout << "  scene B from scratch" << std::endl;
  const auto b_run = training::train(b, cfg, work / "B_run", verbose_resume());

  auto a_net = training::load_depth_network(a_run.best_dir);
  const double a_on_a = delta_of(a_net, a_eval);
  const double a_on_b = delta_of(a_net, b_eval);
  const double b_scratch = b_run.best_delta;

  const int scratch_epochs = b_run.best_epoch;
  auto ft_cfg = cfg;
  ft_cfg.max_epochs =
      std::max(1, static_cast<int>(std::floor(kFinetuneEpochFraction * scratch_epochs)));
  std::cout << "  fine-tune A -> B for " << ft_cfg.max_epochs << " epoch(s)" << std::endl;
  const auto ft = training::finetune(a_run.best_dir, b, nullptr, 0.0, ft_cfg, work / "AB_finetune",
                                     verbose_resume());
  std::cout << "  fine-tune A -> B with 50% scene-A batches" << std::endl;
  const auto mixed = training::finetune(a_run.best_dir, b, &a, 0.5, ft_cfg, work / "AB_mixed",
                                        verbose_resume());

  auto ft_net = training::load_depth_network(ft.best_dir);
  const double ft_on_b = delta_of(ft_net, b_eval);
  auto mixed_net = training::load_depth_network(mixed.last_dir);
  const double mixed_on_a = delta_of(mixed_net, a_eval);
  const double mixed_on_b = delta_of(mixed_net, b_eval);

  const double drop = a_on_a - a_on_b;
  const double gap = b_scratch - ft_on_b;
  const double forgetting = a_on_a - mixed_on_a;
  const bool pass = drop >= kTransferDrop && gap <= kRecoveryGap && forgetting <= kMixedForgetting;
  return {pass,
          "A->A " + fmt(a_on_a) + ", A->B " + fmt(a_on_b) + " (drop " + fmt(drop) +
              ", need >= 0.10); B scratch " + fmt(b_scratch) + " at epoch " +
              std::to_string(scratch_epochs) + ", fine-tuned " + fmt(ft_on_b) + " after " +
              std::to_string(ft_cfg.max_epochs) + " epoch(s) (gap " + fmt(gap) +
              ", need <= 0.05); mixed: A " + fmt(mixed_on_a) + " (forgetting " + fmt(forgetting) +
              ", need <= 0.03), B " + fmt(mixed_on_b)};
}

// --- 7: model size -----------------------------------------------------------------------

Outcome model_size() {
  const auto model = networks::build_model(networks::NetworkConfig{});
  const auto depth = networks::count_depth_parameters(model);
  const auto training_count = networks::count_training_parameters(model);
  const double rd = static_cast<double>(depth) / 17e6 - 1.0;
  const double rt = static_cast<double>(training_count) / 21e6 - 1.0;
  return {depth < training_count && std::abs(rd) <= kModelSizeTolerance &&
              std::abs(rt) <= kModelSizeTolerance,
          "depth-only " + std::to_string(depth) + " (" + fmt(100 * rd, 1) + "% vs 17M), training " +
              std::to_string(training_count) + " (" + fmt(100 * rt, 1) + "% vs 21M), tol 15%"};
}

// --- 8: reproducibility -----------------------------------------------------------------

Outcome reproducibility(const fs::path& work) {
  const fs::path dir = work / "repro";
  fs::remove_all(dir);
  const auto dataset = ensure_benchmark(dir / "data", synthcam::preset("demo", 96, 48, 30), 96, 48);
  auto cfg = config_for(96, 48, 3);
  cfg.batch_size = 4;
  cfg.steps_per_epoch = 3;
  cfg.seed = 11;
  const training::TrainSource source{"demo", &dataset, training::split_for(dataset, cfg)};
  training::RunOptions quiet;
  training::train(source, cfg, dir / "first", quiet);
  training::train(source, cfg, dir / "second", quiet);
  training::RunOptions piece;
  piece.epoch_budget = 1;
  for (int i = 0; i < 3; ++i) training::train(source, cfg, dir / "resumed", piece);

  const auto first = training::read_step_log(dir / "first" / "train_log.jsonl");
  const auto second = training::read_step_log(dir / "second" / "train_log.jsonl");
  const auto resumed = training::read_step_log(dir / "resumed" / "train_log.jsonl");
  auto a = training::load_depth_network(dir / "first" / "last");
  auto b = training::load_depth_network(dir / "resumed" / "last");
  bool params_equal = true;
  const auto pa = a->parameters();
  const auto pb = b->parameters();
  for (size_t i = 0; i < pa.size(); ++i) params_equal &= torch::equal(pa[i], pb[i]);
  const bool pass = first.size() == 9 && first == second && first == resumed && params_equal;
  return {pass, std::to_string(first.size()) + " logged steps; identical-seed logs " +
                    (first == second ? "equal" : "DIFFER") + "; resumed-in-3-pieces log " +
                    (first == resumed ? "equal" : "DIFFERS") + "; final parameters " +
                    (params_equal ? "bitwise equal" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aerodepth acceptance suite"};
  std::string work = AERODEPTH_ACCEPTANCE_DIR;
  std::vector<int> only;
  app.add_option("--workdir", work, "cache for rendered benchmarks and training runs");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, geometry_suite},
      {2, gradient_suite},
      {3, loss_optimality},
      {4, metric_oracle},
      {5, [&] { return desk_training(work); }},
      {6, [&] { return finetuning(work); }},
      {7, model_size},
      {8, [&] { return reproducibility(work); }},
  };
  int failures = 0;
  std::vector<std::string> summary;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const std::string line = "criterion " + std::to_string(id) + ": " +
                             (outcome.pass ? "PASS" : "FAIL") + "  " + outcome.detail + "  [" +
                             fmt(seconds_since(start), 1) + " s]";
    std::cout << line << std::endl;
    summary.push_back(line);
    failures += outcome.pass ? 0 : 1;
  }
  std::cout << "\nsummary\n";
  for (const auto& line : summary) std::cout << line << '\n';
  return failures == 0 ? 0 : 1;
}
