#include "aerodepth/evaluation.hpp"

#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aerodepth/errors.hpp"
#include "aerodepth/geometry.hpp"

namespace aerodepth::evaluation {

namespace fs = std::filesystem;

namespace {

void require_same_2d(const torch::Tensor& a, const torch::Tensor& b,
                     const torch::Tensor& mask) {
  if (a.dim() != 2 || a.sizes() != b.sizes() || a.sizes() != mask.sizes()) {
    throw ShapeError("prediction, ground truth and mask must be [H, W] of one size");
  }
}

std::vector<double> to_vector(const torch::Tensor& t) {
  const auto c = t.to(torch::kCPU, torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

}  // namespace

double EvalReport::delta_at(double threshold) const {
  for (size_t i = 0; i < kDeltaThresholds.size(); ++i) {
    if (kDeltaThresholds[i] == threshold) return delta[i];
  }
  throw InvalidInputError("no delta accuracy recorded for threshold " +
                          std::to_string(threshold));
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInputError("median of an empty set");
  const size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

ScaledDepth median_scale(const torch::Tensor& prediction,
                         const torch::Tensor& ground_truth,
                         const torch::Tensor& valid) {
  require_same_2d(prediction, ground_truth, valid);
  const auto mask = valid.to(torch::kBool);
  if (!mask.any().item<bool>()) {
    throw InvalidInputError("ground truth has no valid pixel");
  }
  const double gt_median = median(to_vector(ground_truth.masked_select(mask)));
  const double pred_median = median(to_vector(prediction.masked_select(mask)));
  if (!(pred_median > 0.0)) throw InvalidInputError("prediction median must be positive");
  ScaledDepth out;
  out.ratio = gt_median / pred_median;
  out.depth = prediction.to(torch::kFloat64) * out.ratio;
  return out;
}

torch::Tensor align_resize(const torch::Tensor& prediction, int64_t height,
                           int64_t width) {
  if (height < 1 || width < 1) throw InvalidInputError("target size must be positive");
  if (prediction.dim() != 2) throw ShapeError("prediction must be [H, W]");
  if (prediction.size(0) == height && prediction.size(1) == width) return prediction;
  return geometry::upsample_to(prediction.unsqueeze(0).unsqueeze(0), height, width)
      .squeeze(0)
      .squeeze(0);
}

EvalReport compute_metrics(const torch::Tensor& prediction,
                           const torch::Tensor& ground_truth,
                           const torch::Tensor& valid) {
  require_same_2d(prediction, ground_truth, valid);
  const auto mask = valid.to(torch::kBool);
  const auto d = prediction.to(torch::kFloat64).masked_select(mask);
  const auto g = ground_truth.to(torch::kFloat64).masked_select(mask);
  EvalReport report;
  report.valid_pixels = d.numel();
  if (report.valid_pixels == 0) throw InvalidInputError("evaluation mask is empty");
  const auto diff = d - g;
  report.rmse = std::sqrt((diff * diff).mean().item<double>());
  report.l1_rel = (diff.abs() / g).mean().item<double>();
  const auto ratio = torch::maximum(d / g, g / d);
  for (size_t i = 0; i < kDeltaThresholds.size(); ++i) {
    report.delta[i] = (ratio < kDeltaThresholds[i]).to(torch::kFloat64).mean().item<double>();
  }
  return report;
}

EvalReport evaluate(const torch::Tensor& prediction,
                    const torch::Tensor& ground_truth,
                    const torch::Tensor& valid) {
  const auto aligned = align_resize(prediction, ground_truth.size(0), ground_truth.size(1));
  const auto scaled = median_scale(aligned, ground_truth, valid);
  auto report = compute_metrics(scaled.depth, ground_truth, valid);
  report.scale_ratio = scaled.ratio;
  return report;
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  if (reports.empty()) throw InvalidInputError("no reports to average");
  EvalReport mean;
  mean.scale_ratio = 0.0;
  for (const auto& r : reports) {
    mean.rmse += r.rmse;
    mean.l1_rel += r.l1_rel;
    for (size_t i = 0; i < mean.delta.size(); ++i) mean.delta[i] += r.delta[i];
    mean.valid_pixels += r.valid_pixels;
    mean.scale_ratio += r.scale_ratio;
  }
  const double n = static_cast<double>(reports.size());
  mean.rmse /= n;
  mean.l1_rel /= n;
  for (auto& d : mean.delta) d /= n;
  mean.scale_ratio /= n;
  return mean;
}

// --- files ------------------------------------------------------------------

void write_depth_file(const fs::path& path, const torch::Tensor& depth,
                      const std::string& units) {
  if (depth.dim() != 2) throw ShapeError("depth file holds an [H, W] grid");
  const auto values = depth.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write depth file " + path.string());
  out << "AERODEPTH-DEPTH 1\nwidth " << values.size(1) << "\nheight " << values.size(0)
      << "\nunits " << units << "\nend\n";
  static_assert(std::endian::native == std::endian::little,
                "depth files are little-endian");
  out.write(reinterpret_cast<const char*>(values.data_ptr<float>()),
            static_cast<std::streamsize>(values.numel() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

torch::Tensor read_depth_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open depth file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "AERODEPTH-DEPTH 1") {
    throw IoError(path.string() + ": not a depth file");
  }
  int64_t width = -1;
  int64_t height = -1;
  while (std::getline(in, line) && line != "end") {
    std::istringstream kv(line);
    std::string key;
    kv >> key;
    if (key == "width") {
      kv >> width;
    } else if (key == "height") {
      kv >> height;
    } else if (key != "units") {
      throw IoError(path.string() + ": unknown header key '" + key + "'");
    }
  }
  if (line != "end" || width < 1 || height < 1) {
    throw IoError(path.string() + ": incomplete header");
  }
  auto values = torch::empty({height, width}, torch::kFloat32);
  in.read(reinterpret_cast<char*>(values.data_ptr<float>()),
          static_cast<std::streamsize>(values.numel() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(values.numel() * sizeof(float))) {
    throw IoError(path.string() + ": truncated payload");
  }
  return values;
}

GroundTruth load_ground_truth(const fs::path& path) {
  torch::Tensor depth;
  if (path.extension() == ".png") {
    const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH);
    if (raw.empty() || raw.depth() != CV_16U) {
      throw IoError(path.string() + ": expected a 16-bit single-channel PNG");
    }
    cv::Mat f;
    raw.convertTo(f, CV_64F, 1.0 / kPng16Scale);
    depth = torch::from_blob(f.data, {f.rows, f.cols}, torch::kFloat64).clone();
  } else {
    depth = read_depth_file(path).to(torch::kFloat64);
  }
  GroundTruth gt;
  gt.valid = torch::isfinite(depth) & (depth > 0.0) & (depth <= kMaxGroundTruthDepth);
  gt.depth = torch::where(gt.valid, depth, torch::zeros_like(depth));
  return gt;
}

void write_report_csv(const fs::path& path, std::span<const ReportRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out.precision(6);
  out << std::fixed << "name,rmse,l1_rel,delta_1.25,delta_1.05\n";
  for (const auto& row : rows) {
    out << row.name << ',' << row.report.rmse << ',' << row.report.l1_rel << ','
        << row.report.delta_at(1.25) << ',' << row.report.delta_at(1.05) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace aerodepth::evaluation
