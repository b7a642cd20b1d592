#include "aerodepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "aerodepth/errors.hpp"
#include "aerodepth/image_io.hpp"

namespace aerodepth::data {

namespace fs = std::filesystem;
using torch::indexing::Slice;

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
  // splitmix64 finaliser applied to a running combination.
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

void FrameSequence::validate() const {
  intrinsics.validate();
  for (size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].index <= frames[i - 1].index) {
      throw InvalidInputError("sequence '" + id + "': frame indices must increase");
    }
  }
  if (offset < 1) throw InvalidInputError("sequence '" + id + "': offset must be >= 1");
}

std::vector<TripletIndex> sample_triplets(const FrameSequence& sequence,
                                          int offset, int sequence_id) {
  if (offset < 1) {
    throw InvalidInputError("triplet offset must be >= 1 (offset 0 has no parallax)");
  }
  const int n = static_cast<int>(sequence.frames.size());
  std::vector<TripletIndex> out;
  if (n < 2 * offset + 1) {
    std::cerr << "warning: sequence '" << sequence.id << "' has " << n
              << " frames, too few for offset " << offset << "\n";
    return out;
  }
  out.reserve(n - 2 * offset);
  for (int c = offset; c + offset < n; ++c) out.push_back({sequence_id, c, offset});
  return out;
}

// --- augmentation -----------------------------------------------------------

void AugmentationConfig::validate() const {
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw ConfigError("flip_probability must lie in [0, 1]");
  }
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0) {
    throw ConfigError("jitter amplitudes must be >= 0");
  }
  if (hue > 0.5) throw ConfigError("hue amplitude must be <= 0.5");
  if (!(min_crop_scale >= 1.0) || max_crop_scale < min_crop_scale) {
    throw ConfigError("crop scale range must satisfy 1 <= min <= max");
  }
}

namespace {

torch::Tensor grayscale(const torch::Tensor& rgb) {
  // rgb: [N, 3, H, W] -> [N, 1, H, W]
  return 0.299 * rgb.select(1, 0).unsqueeze(1) + 0.587 * rgb.select(1, 1).unsqueeze(1) +
         0.114 * rgb.select(1, 2).unsqueeze(1);
}

torch::Tensor rgb_to_hsv(const torch::Tensor& rgb) {
  const auto r = rgb.select(1, 0);
  const auto g = rgb.select(1, 1);
  const auto b = rgb.select(1, 2);
  const auto maxc = std::get<0>(rgb.max(1));
  const auto minc = std::get<0>(rgb.min(1));
  const auto chroma = maxc - minc;
  const auto ones = torch::ones_like(maxc);
  const auto s = chroma / torch::where(maxc == 0, ones, maxc);
  const auto cd = torch::where(chroma == 0, ones, chroma);
  const auto rc = (maxc - r) / cd;
  const auto gc = (maxc - g) / cd;
  const auto bc = (maxc - b) / cd;
  const auto hr = (maxc == r).to(rgb.dtype()) * (bc - gc);
  const auto hg = ((maxc == g) & (maxc != r)).to(rgb.dtype()) * (2.0 + rc - bc);
  const auto hb = ((maxc != g) & (maxc != r)).to(rgb.dtype()) * (4.0 + gc - rc);
  const auto h = torch::fmod((hr + hg + hb) / 6.0 + 1.0, 1.0);
  return torch::stack({h, s, maxc}, 1);
}

torch::Tensor hsv_to_rgb(const torch::Tensor& hsv) {
  const auto h = hsv.select(1, 0);
  const auto s = hsv.select(1, 1);
  const auto v = hsv.select(1, 2);
  const auto h6 = h * 6.0;
  const auto sector = torch::floor(h6);
  const auto f = h6 - sector;
  const auto i = torch::remainder(sector, 6.0).to(torch::kLong);
  const auto p = (v * (1.0 - s)).clamp(0.0, 1.0);
  const auto q = (v * (1.0 - s * f)).clamp(0.0, 1.0);
  const auto t = (v * (1.0 - s * (1.0 - f))).clamp(0.0, 1.0);
  auto pick = [&](std::array<const torch::Tensor*, 6> by_sector) {
    auto out = torch::zeros_like(v);
    for (int k = 0; k < 6; ++k) out = torch::where(i == k, *by_sector[k], out);
    return out;
  };
  const auto r = pick({&v, &q, &p, &p, &t, &v});
  const auto g = pick({&t, &v, &v, &q, &p, &p});
  const auto b = pick({&p, &p, &t, &v, &v, &q});
  return torch::stack({r, g, b}, 1);
}

}  // namespace

Triplet augment(const Triplet& input, const AugmentationConfig& config,
                uint64_t seed) {
  config.validate();
  Triplet out = input;
  if (!config.enabled) return out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto symmetric = [&](double amplitude) { return (2.0 * unit(rng) - 1.0) * amplitude; };

  // Draw every random quantity up front so the stream does not depend on
  // which steps are enabled.
  const bool flip = unit(rng) < config.flip_probability;
  const double zoom = config.min_crop_scale +
                      unit(rng) * (config.max_crop_scale - config.min_crop_scale);
  const double crop_u = unit(rng);
  const double crop_v = unit(rng);
  const double brightness = 1.0 + symmetric(config.brightness);
  const double contrast = 1.0 + symmetric(config.contrast);
  const double saturation = 1.0 + symmetric(config.saturation);
  const double hue = symmetric(config.hue);

  auto images = torch::stack({out.left, out.ref, out.right});  // [3, C, H, W]
  const int64_t h = images.size(2);
  const int64_t w = images.size(3);

  if (flip && config.flip_mode == FlipMode::Mirror) {
    images = images.flip({3});
    out.intrinsics.cx = static_cast<double>(w - 1) - out.intrinsics.cx;
  }

  if (zoom > 1.0) {
    const double crop_w = static_cast<double>(w) / zoom;
    const double crop_h = static_cast<double>(h) / zoom;
    const double x0 = crop_u * (static_cast<double>(w) - crop_w);
    const double y0 = crop_v * (static_cast<double>(h) - crop_h);
    const auto opts = images.options();
    const auto u = (x0 + (torch::arange(w, opts) + 0.5) * (crop_w / w) - 0.5)
                       .clamp(0.0, static_cast<double>(w - 1));
    const auto v = (y0 + (torch::arange(h, opts) + 0.5) * (crop_h / h) - 0.5)
                       .clamp(0.0, static_cast<double>(h - 1));
    geometry::SampleGrid grid;
    grid.coords = torch::stack({u.view({1, w}).expand({h, w}), v.view({h, 1}).expand({h, w})}, -1)
                      .unsqueeze(0)
                      .expand({3, h, w, 2});
    grid.valid = torch::ones({3, 1, h, w}, torch::kBool);
    images = geometry::bilinear_sample(images, grid).image;
    out.intrinsics = out.intrinsics.cropped_and_resized(
        x0, y0, crop_w, crop_h, static_cast<int>(w), static_cast<int>(h));
  }

  if (config.brightness > 0.0) images = (images * brightness).clamp(0.0, 1.0);
  if (config.contrast > 0.0) {
    const auto mean = grayscale(images).mean({1, 2, 3}, /*keepdim=*/true);
    images = (images * contrast + mean * (1.0 - contrast)).clamp(0.0, 1.0);
  }
  if (config.saturation > 0.0) {
    images = (images * saturation + grayscale(images) * (1.0 - saturation)).clamp(0.0, 1.0);
  }
  if (config.hue > 0.0) {
    auto hsv = rgb_to_hsv(images);
    hsv.select(1, 0).copy_(torch::remainder(hsv.select(1, 0) + hue, 1.0));
    images = hsv_to_rgb(hsv).clamp(0.0, 1.0);
  }

  out.left = images[0].contiguous();
  out.ref = images[1].contiguous();
  out.right = images[2].contiguous();
  if (flip && config.flip_mode == FlipMode::Temporal) std::swap(out.left, out.right);
  return out;
}

// --- splitting --------------------------------------------------------------

Split split_train_eval(std::span<const TripletIndex> triplets, double ratio,
                       uint64_t seed, bool guard) {
  if (triplets.empty()) throw InvalidInputError("cannot split an empty triplet set");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw InvalidInputError("split ratio must lie strictly between 0 and 1");
  }
  const auto n = static_cast<int64_t>(triplets.size());
  if (n < 2) throw InvalidInputError("need at least two triplets to split");
  const int64_t n_eval =
      std::clamp<int64_t>(std::llround(static_cast<double>(n) - ratio * static_cast<double>(n)), 1, n - 1);

  std::map<int, std::vector<TripletIndex>> by_sequence;
  for (const auto& t : triplets) by_sequence[t.sequence].push_back(t);
  for (auto& [_, list] : by_sequence) std::sort(list.begin(), list.end());

  // Largest-remainder allocation of evaluation triplets across sequences.
  std::vector<std::pair<int, int64_t>> quota;
  std::vector<std::pair<double, int>> remainders;
  int64_t assigned = 0;
  for (const auto& [seq, list] : by_sequence) {
    const double exact = static_cast<double>(n_eval) * list.size() / n;
    const auto q = static_cast<int64_t>(std::floor(exact));
    quota.emplace_back(seq, q);
    remainders.emplace_back(exact - q, static_cast<int>(quota.size() - 1));
    assigned += q;
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t k = 0; assigned < n_eval && k < remainders.size(); ++k, ++assigned) {
    ++quota[remainders[k].second].second;
  }

  Split split;
  for (const auto& [seq, q] : quota) {
    const auto& list = by_sequence[seq];
    const auto count = static_cast<int64_t>(list.size());
    std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(seq), 0x5b1d));
    const int64_t start =
        q > 0 ? std::uniform_int_distribution<int64_t>(0, count - q)(rng) : count;
    std::set<int> eval_centers;
    for (int64_t i = start; i < start + q; ++i) {
      split.eval.push_back(list[i]);
      eval_centers.insert(list[i].center);
    }
    for (int64_t i = 0; i < count; ++i) {
      if (i >= start && i < start + q) continue;
      const auto& t = list[i];
      const bool touches = eval_centers.count(t.left()) || eval_centers.count(t.center) ||
                           eval_centers.count(t.right());
      (guard && touches ? split.guard : split.train).push_back(t);
    }
  }
  return split;
}

// --- manifest ---------------------------------------------------------------

DatasetManifest DatasetManifest::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset manifest " + path.string());
  const fs::path base = path.parent_path();
  DatasetManifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string head;
    if (!(tokens >> head) || head[0] == '#') continue;
    if (head != "sequence") {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": expected 'sequence', got '" + head + "'");
    }
    SequenceEntry entry;
    std::string token;
    while (tokens >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw IoError(path.string() + ":" + std::to_string(line_no) +
                      ": expected key=value, got '" + token + "'");
      }
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      auto resolve = [&](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? q : base / q;
      };
      if (key == "name") {
        entry.name = value;
      } else if (key == "images") {
        entry.images = resolve(value);
      } else if (key == "intrinsics") {
        entry.intrinsics = resolve(value);
      } else if (key == "depth") {
        entry.depth = resolve(value);
      } else if (key == "offset") {
        try {
          entry.offset = std::stoi(value);
        } catch (const std::exception&) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad offset");
        }
      } else {
        throw IoError(path.string() + ":" + std::to_string(line_no) +
                      ": unknown key '" + key + "'");
      }
    }
    if (entry.name.empty() || entry.images.empty() || entry.intrinsics.empty()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) +
                    ": name, images and intrinsics are required");
    }
    manifest.sequences.push_back(std::move(entry));
  }
  return manifest;
}

void DatasetManifest::write(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset manifest " + path.string());
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) {
    return (p.is_absolute() && !base.empty() ? fs::proximate(p, base) : p).generic_string();
  };
  out << "# aerodepth dataset manifest\n";
  for (const auto& s : sequences) {
    out << "sequence name=" << s.name << " images=" << rel(s.images)
        << " intrinsics=" << rel(s.intrinsics) << " offset=" << s.offset;
    if (!s.depth.empty()) out << " depth=" << rel(s.depth);
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Frame> list_frames(const fs::path& image_dir, const fs::path& depth_dir) {
  if (!fs::is_directory(image_dir)) {
    throw IoError("image directory not found: " + image_dir.string());
  }
  std::vector<Frame> frames;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
    const std::string stem = entry.path().stem().string();
    auto digits_begin = stem.find_last_not_of("0123456789");
    digits_begin = digits_begin == std::string::npos ? 0 : digits_begin + 1;
    if (digits_begin >= stem.size()) continue;
    Frame f;
    f.image = entry.path();
    f.index = std::stoll(stem.substr(digits_begin));
    if (!depth_dir.empty()) {
      for (const char* dext : {".depth", ".png"}) {
        const auto candidate = depth_dir / (stem + dext);
        if (fs::exists(candidate)) {
          f.depth = candidate;
          break;
        }
      }
    }
    frames.push_back(std::move(f));
  }
  std::sort(frames.begin(), frames.end(),
            [](const Frame& a, const Frame& b) { return a.index < b.index; });
  for (size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].index == frames[i - 1].index) {
      throw IoError("duplicate frame number " + std::to_string(frames[i].index) +
                    " in " + image_dir.string());
    }
  }
  return frames;
}

FrameSequence load_sequence(const SequenceEntry& entry, const fs::path& base_dir) {
  auto resolve = [&](const fs::path& p) {
    return p.empty() || p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  FrameSequence seq;
  seq.id = entry.name;
  seq.offset = entry.offset;
  seq.intrinsics = geometry::read_intrinsics(resolve(entry.intrinsics));
  seq.frames = list_frames(resolve(entry.images), resolve(entry.depth));
  seq.validate();
  return seq;
}

// --- in-memory dataset ------------------------------------------------------

Dataset::Dataset(std::vector<FrameSequence> sequences, int width, int height)
    : width_(width), height_(height), sequences_(std::move(sequences)) {
  if (width < 2 || height < 2) throw InvalidInputError("dataset resolution too small");
  for (const auto& seq : sequences_) {
    seq.validate();
    intrinsics_.push_back(seq.intrinsics.resized(width, height));
    std::vector<torch::Tensor> images;
    images.reserve(seq.frames.size());
    for (const auto& frame : seq.frames) {
      auto img = io::read_image(frame.image);
      if (img.size(1) != seq.intrinsics.height || img.size(2) != seq.intrinsics.width) {
        throw ShapeError("frame " + frame.image.string() +
                         " does not match the sequence intrinsics size");
      }
      images.push_back(io::resize_image(img, width, height));
    }
    images_.push_back(std::move(images));
  }
}

Dataset Dataset::from_manifest(const fs::path& manifest, int width, int height) {
  const auto m = DatasetManifest::read(manifest);
  std::vector<FrameSequence> sequences;
  for (const auto& entry : m.sequences) sequences.push_back(load_sequence(entry));
  return Dataset(std::move(sequences), width, height);
}

const torch::Tensor& Dataset::image(int sequence, int position) const {
  return images_.at(sequence).at(position);
}

std::vector<TripletIndex> Dataset::triplets() const {
  std::vector<TripletIndex> out;
  for (size_t s = 0; s < sequences_.size(); ++s) {
    auto list = sample_triplets(sequences_[s], sequences_[s].offset, static_cast<int>(s));
    out.insert(out.end(), list.begin(), list.end());
  }
  return out;
}

Triplet Dataset::triplet(const TripletIndex& index) const {
  Triplet t;
  t.left = image(index.sequence, index.left());
  t.ref = image(index.sequence, index.center);
  t.right = image(index.sequence, index.right());
  t.intrinsics = intrinsics(index.sequence);
  t.offset = index.offset;
  t.source = index;
  return t;
}

}  // namespace aerodepth::data
