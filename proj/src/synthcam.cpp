#include "aerodepth/synthcam.hpp"

#include <ATen/Parallel.h>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "aerodepth/errors.hpp"
#include "aerodepth/evaluation.hpp"
#include "aerodepth/image_io.hpp"

namespace aerodepth::synthcam {

namespace fs = std::filesystem;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

uint64_t hash3(int64_t x, int64_t y, uint64_t seed) {
  return data::mix_seed(seed, static_cast<uint64_t>(x) * 0x9E3779B1ULL,
                        static_cast<uint64_t>(y) * 0x85EBCA77ULL);
}

double lattice(int64_t x, int64_t y, uint64_t seed) {
  return static_cast<double>(hash3(x, y, seed) >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

// C2-continuous value noise in [0, 1].
double value_noise(double x, double y, uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<int64_t>(fx);
  const auto iy = static_cast<int64_t>(fy);
  const double tx = fade(x - fx);
  const double ty = fade(y - fy);
  const double a = lattice(ix, iy, seed);
  const double b = lattice(ix + 1, iy, seed);
  const double c = lattice(ix, iy + 1, seed);
  const double d = lattice(ix + 1, iy + 1, seed);
  const double top = a + tx * (b - a);
  const double bottom = c + tx * (d - c);
  return top + ty * (bottom - top);
}

double fbm(double x, double y, int octaves, uint64_t seed) {
  double sum = 0.0;
  double norm = 0.0;
  double amplitude = 1.0;
  double frequency = 1.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amplitude * value_noise(x * frequency, y * frequency, seed + 131 * o);
    norm += amplitude;
    amplitude *= 0.5;
    frequency *= 2.0;
  }
  return sum / norm;
}

// Orientation with the optical axis pitched `tilt` away from nadir towards the
// horizontal direction `forward`; image x points to the right of `forward`.
Matrix3d view_rotation(const Vector3d& forward, double tilt) {
  const Vector3d up(0.0, 0.0, 1.0);
  const Vector3d z = std::sin(tilt) * forward - std::cos(tilt) * up;
  const Vector3d y = -std::cos(tilt) * forward - std::sin(tilt) * up;
  const Vector3d x = y.cross(z);
  Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

geometry::PoseSE3 pose_from(const Matrix3d& r, const Vector3d& c) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = c;
  return geometry::PoseSE3::from_matrix(m);
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vector3d normal = Vector3d::UnitZ();
  Vector3d point = Vector3d::Zero();
  int surface = -1;  // 0 ground, 1 + 6 * box + face
};

bool inside_box(const Box& b, const Vector3d& p, double margin = 0.0) {
  return p.x() > b.x_min - margin && p.x() < b.x_max + margin &&
         p.y() > b.y_min - margin && p.y() < b.y_max + margin &&
         p.z() > -margin && p.z() < b.height + margin;
}

void intersect_box(const Box& box, int box_index, const Vector3d& o,
                   const Vector3d& d, Hit& hit) {
  const double lo[3] = {box.x_min, box.y_min, 0.0};
  const double hi[3] = {box.x_max, box.y_max, box.height};
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  double near_sign = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo[a] || o[a] > hi[a]) return;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    double sign = -1.0;  // entering through the low face
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
  }
  if (near_axis < 0 || t_near > t_far || t_near <= 0.0 || t_near >= hit.t) return;
  hit.t = t_near;
  hit.normal = Vector3d::Zero();
  hit.normal[near_axis] = near_sign;
  hit.point = o + t_near * d;
  hit.surface = 1 + 6 * box_index + 2 * near_axis + (near_sign > 0 ? 1 : 0);
}

std::array<double, 3> shade(const SceneSpec& spec, const Hit& hit,
                            const Vector3d& light) {
  double s = 0.0;
  double t = 0.0;
  const Vector3d& p = hit.point;
  if (hit.surface == 0 || std::abs(hit.normal.z()) > 0.5) {
    s = p.x();
    t = p.y();
  } else if (std::abs(hit.normal.x()) > 0.5) {
    s = p.y();
    t = p.z();
  } else {
    s = p.x();
    t = p.z();
  }
  const uint64_t seed = data::mix_seed(spec.texture_seed, static_cast<uint64_t>(hit.surface));
  // Boxes get a base colour per box, the ground a fixed earthy tone; a shared
  // luminance pattern plus a weaker per-channel pattern give the texture.
  std::array<double, 3> base{0.45, 0.5, 0.35};
  if (hit.surface > 0) {
    const auto box = static_cast<int64_t>((hit.surface - 1) / 6);
    for (int c = 0; c < 3; ++c) base[c] = 0.3 + 0.5 * lattice(box, c, spec.texture_seed);
  }
  const double u = s / spec.texture_scale;
  const double v = t / spec.texture_scale;
  const double luminance = fbm(u, v, spec.texture_octaves, seed);
  const double lambert = 0.35 + 0.65 * std::max(0.0, hit.normal.dot(light));
  std::array<double, 3> rgb{};
  for (int c = 0; c < 3; ++c) {
    const double tint = fbm(u, v, spec.texture_octaves, seed + 7919 * (c + 1));
    const double albedo = base[c] * (0.3 + 1.1 * luminance) + 0.2 * (tint - 0.5);
    rgb[c] = std::clamp(spec.brightness * lambert * albedo, 0.0, 1.0);
  }
  return rgb;
}

}  // namespace

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Orbit:
      return "orbit";
    case TrajectoryKind::Lateral:
      return "lateral";
    case TrajectoryKind::Forward:
      return "forward";
  }
  return "unknown";
}

TrajectoryKind parse_trajectory(const std::string& name) {
  if (name == "orbit") return TrajectoryKind::Orbit;
  if (name == "lateral") return TrajectoryKind::Lateral;
  if (name == "forward") return TrajectoryKind::Forward;
  throw ConfigError("unknown trajectory '" + name + "' (orbit, lateral, forward)");
}

void SceneSpec::validate() const {
  intrinsics.validate();
  if (frame_count < 1) throw SceneError(name + ": frame_count must be >= 1");
  if (offset < 1) throw SceneError(name + ": offset must be >= 1");
  if (!(texture_scale > 0.0) || texture_octaves < 1) {
    throw SceneError(name + ": texture scale/octaves must be positive");
  }
  if (!(altitude > 0.0)) throw SceneError(name + ": camera must be above the ground");
  if (trajectory == TrajectoryKind::Orbit && !(orbit_radius > 0.0)) {
    throw SceneError(name + ": orbit radius must be positive");
  }
  if (!(min_depth > 0.0) || !(max_depth > min_depth)) {
    throw SceneError(name + ": invalid depth range");
  }
  if (noise < 0.0 || brightness <= 0.0) throw SceneError(name + ": invalid lighting/noise");
  for (const auto& b : boxes) {
    if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min) || !(b.height > 0.0)) {
      throw SceneError(name + ": boxes need positive extent");
    }
  }
  for (int i = 0; i < frame_count; ++i) {
    const auto m = camera_pose(*this, i).matrix();
    const Vector3d c = m.topRightCorner<3, 1>();
    if (c.z() <= 0.0) throw SceneError(name + ": camera below the ground plane");
    for (const auto& b : boxes) {
      if (inside_box(b, c, 0.5)) {
        throw SceneError(name + ": camera path enters a box at frame " + std::to_string(i));
      }
    }
  }
}

geometry::PoseSE3 camera_pose(const SceneSpec& spec, int index) {
  const double tilt = spec.tilt_deg * kDeg;
  const double heading = spec.heading_deg * kDeg;
  switch (spec.trajectory) {
    case TrajectoryKind::Lateral:
    case TrajectoryKind::Forward: {
      const Vector3d forward(std::cos(heading), std::sin(heading), 0.0);
      const Vector3d right = forward.cross(Vector3d::UnitZ());
      const Vector3d dir = spec.trajectory == TrajectoryKind::Lateral ? right : forward;
      const Vector3d c = Vector3d(spec.origin[0], spec.origin[1], spec.altitude) +
                         index * spec.speed * dir;
      return pose_from(view_rotation(forward, tilt), c);
    }
    case TrajectoryKind::Orbit: {
      const double phi = heading + index * spec.speed / spec.orbit_radius;
      const Vector3d radial(std::cos(phi), std::sin(phi), 0.0);
      const Vector3d c = Vector3d(spec.origin[0], spec.origin[1], spec.altitude) +
                         spec.orbit_radius * radial;
      return pose_from(view_rotation(-radial, tilt), c);
    }
  }
  throw SceneError("unknown trajectory");
}

std::pair<torch::Tensor, torch::Tensor> render_frame(
    const SceneSpec& spec, const geometry::PoseSE3& camera_to_world) {
  const auto& k = spec.intrinsics;
  const int w = k.width;
  const int h = k.height;
  const Eigen::Matrix4d m = camera_to_world.matrix();
  const Matrix3d r = m.topLeftCorner<3, 3>();
  const Vector3d o = m.topRightCorner<3, 1>();
  const Vector3d light = Vector3d(spec.light_direction[0], spec.light_direction[1],
                                  spec.light_direction[2])
                             .normalized();

  // Boxes that can appear in this view: within the farthest visible distance.
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(spec.boxes.size()); ++i) {
    const auto& b = spec.boxes[i];
    const double dx = std::max({b.x_min - o.x(), 0.0, o.x() - b.x_max});
    const double dy = std::max({b.y_min - o.y(), 0.0, o.y() - b.y_max});
    if (std::hypot(dx, dy) < spec.max_depth * 1.25) candidates.push_back(i);
  }

  auto image = torch::empty({3, h, w}, torch::kFloat32);
  auto depth = torch::empty({h, w}, torch::kFloat32);
  auto img = image.accessor<float, 3>();
  auto dep = depth.accessor<float, 2>();
  std::atomic<bool> missed{false};
  std::atomic<bool> out_of_range{false};

  at::parallel_for(0, h, 1, [&](int64_t row_begin, int64_t row_end) {
    for (int64_t v = row_begin; v < row_end; ++v) {
      for (int u = 0; u < w; ++u) {
        const Vector3d dc((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        const Vector3d d = r * dc;
        Hit hit;
        if (d.z() < 0.0) {
          hit.t = -o.z() / d.z();
          hit.normal = Vector3d::UnitZ();
          hit.point = o + hit.t * d;
          hit.surface = 0;
        }
        for (int i : candidates) intersect_box(spec.boxes[i], i, o, d, hit);
        if (hit.surface < 0) {
          missed = true;
          continue;
        }
        if (!(hit.t > spec.min_depth && hit.t < spec.max_depth)) out_of_range = true;
        const auto rgb = shade(spec, hit, light);
        for (int c = 0; c < 3; ++c) img[c][v][u] = static_cast<float>(rgb[c]);
        dep[v][u] = static_cast<float>(hit.t);
      }
    }
  });
  if (missed) throw SceneError(spec.name + ": a camera ray misses the scene (horizon in view)");
  if (out_of_range) {
    throw SceneError(spec.name + ": rendered depth outside (" + std::to_string(spec.min_depth) +
                     ", " + std::to_string(spec.max_depth) + ")");
  }
  return {image, depth};
}

RenderedSequence render_sequence(const SceneSpec& spec) {
  spec.validate();
  RenderedSequence seq;
  seq.name = spec.name;
  seq.intrinsics = spec.intrinsics;
  for (int i = 0; i < spec.frame_count; ++i) {
    const auto pose = camera_pose(spec, i);
    auto [image, depth] = render_frame(spec, pose);
    if (spec.noise > 0.0) {
      std::mt19937_64 rng(data::mix_seed(spec.noise_seed, static_cast<uint64_t>(i)));
      std::normal_distribution<float> gauss(0.0f, static_cast<float>(spec.noise));
      auto* px = image.data_ptr<float>();
      for (int64_t j = 0; j < image.numel(); ++j) {
        px[j] = std::clamp(px[j] + gauss(rng), 0.0f, 1.0f);
      }
    }
    seq.images.push_back(image);
    seq.depths.push_back(depth);
    seq.camera_to_world.push_back(pose);
  }
  return seq;
}

geometry::PoseSE3 relative_pose(const geometry::PoseSE3& ref_to_world,
                                const geometry::PoseSE3& k_to_world) {
  return k_to_world.inverse().compose(ref_to_world);
}

torch::Tensor visibility_mask(const torch::Tensor& ref_depth,
                              const torch::Tensor& k_depth,
                              const geometry::PoseSE3& ref_to_k,
                              const geometry::CameraIntrinsics& intrinsics,
                              double relative_tolerance) {
  const auto d_ref = ref_depth.to(torch::kFloat64).unsqueeze(0).unsqueeze(0);
  const auto d_k = k_depth.to(torch::kFloat64).unsqueeze(0).unsqueeze(0);
  const auto points = geometry::backproject(d_ref, intrinsics);
  const auto grid = geometry::project(points, ref_to_k, intrinsics);
  const auto sampled = geometry::bilinear_sample(d_k, grid);

  const Eigen::Matrix4d m = ref_to_k.matrix();
  const auto flat = points.view({3, -1});
  const auto z = (m(2, 0) * flat[0] + m(2, 1) * flat[1] + m(2, 2) * flat[2] + m(2, 3))
                     .view_as(ref_depth);
  const auto agree = (sampled.image.squeeze() - z).abs() <= relative_tolerance * z;
  return grid.valid.squeeze(0).squeeze(0) & agree;
}

std::vector<Box> random_boxes(uint64_t seed, int count, double extent,
                              double min_side, double max_side,
                              double min_height, double max_height) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-extent, extent);
  std::uniform_real_distribution<double> side(min_side, max_side);
  std::uniform_real_distribution<double> height(min_height, max_height);
  std::vector<Box> boxes;
  boxes.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double cx = pos(rng);
    const double cy = pos(rng);
    const double sx = side(rng);
    const double sy = side(rng);
    boxes.push_back({cx - sx / 2, cy - sy / 2, cx + sx / 2, cy + sy / 2, height(rng)});
  }
  return boxes;
}

data::DatasetManifest make_benchmark(std::span<const SceneSpec> specs,
                                     const fs::path& out_dir) {
  if (specs.empty()) throw InvalidInputError("make_benchmark needs at least one scene");
  fs::create_directories(out_dir);
  data::DatasetManifest manifest;
  for (const auto& spec : specs) {
    const auto seq = render_sequence(spec);
    const fs::path dir = out_dir / spec.name;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "depth");
    geometry::write_intrinsics(dir / "intrinsics.txt", spec.intrinsics);
    std::ofstream poses(dir / "poses.txt");
    poses.precision(17);
    poses << "# frame r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2 (camera to world)\n";
    for (size_t i = 0; i < seq.images.size(); ++i) {
      char stem[16];
      std::snprintf(stem, sizeof(stem), "%06zu", i);
      io::write_image(dir / "images" / (std::string(stem) + ".png"), seq.images[i]);
      evaluation::write_depth_file(dir / "depth" / (std::string(stem) + ".depth"),
                                   seq.depths[i]);
      const auto m = seq.camera_to_world[i].matrix();
      poses << i;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) poses << ' ' << m(r, c);
      }
      poses << '\n';
    }
    if (!poses) throw IoError("failed writing " + (dir / "poses.txt").string());
    const fs::path rel(spec.name);
    manifest.sequences.push_back({spec.name, rel / "images", rel / "intrinsics.txt",
                                  spec.offset, rel / "depth"});
  }
  manifest.write(out_dir / "manifest.txt");
  return data::DatasetManifest::read(out_dir / "manifest.txt");
}

std::vector<SceneSpec> preset(const std::string& name, int width, int height,
                              int frames) {
  SceneSpec base;
  base.intrinsics = {0.8 * width, 0.8 * width, (width - 1) / 2.0, (height - 1) / 2.0,
                     width, height};
  base.frame_count = frames;

  // Scene A: mid-rise town crossed in a straight line.
  auto town_a = [&](uint64_t seed) {
    SceneSpec s = base;
    s.name = "A";
    s.boxes = random_boxes(seed, 500, 200.0, 4.0, 10.0, 2.0, 9.0);
    s.texture_seed = seed;
    s.altitude = 25.0;
    s.tilt_deg = 45.0;
    s.heading_deg = 90.0;
    s.origin = {-0.5 * frames, -40.0};
    s.speed = 1.0;
    return s;
  };
  // Scene B: a neighbouring, denser and taller town circled by the camera.
  auto town_b = [&](uint64_t seed) {
    SceneSpec s = base;
    s.name = "B";
    s.boxes = random_boxes(seed, 800, 200.0, 5.0, 12.0, 3.0, 14.0);
    s.texture_seed = seed;
    s.texture_scale = 1.3;
    s.altitude = 24.0;
    s.tilt_deg = 50.0;
    s.heading_deg = 60.0;
    s.trajectory = TrajectoryKind::Orbit;
    s.orbit_radius = 70.0;
    s.speed = 1.0;
    s.brightness = 0.9;
    s.light_direction = {-0.4, 0.2, 0.7};
    return s;
  };

  if (name == "demo") {
    SceneSpec s = base;
    s.name = "demo";
    s.boxes = random_boxes(3, 150, 100.0, 4.0, 10.0, 2.0, 10.0);
    s.altitude = 22.0;
    s.tilt_deg = 50.0;
    s.origin = {-1.0 * frames, -40.0};
    s.heading_deg = 90.0;
    s.speed = 2.0;
    s.trajectory = TrajectoryKind::Lateral;
    return {s};
  }
  if (name == "A") return {town_a(11)};
  if (name == "B") return {town_b(23)};
  if (name == "AB") return {town_a(11), town_b(23)};
  if (name == "desk") {
    const auto town = random_boxes(101, 700, 200.0, 4.0, 12.0, 2.0, 14.0);
    std::vector<SceneSpec> specs;
    const double speed = 0.7;
    const double span = speed * frames;
    struct Leg {
      const char* name;
      TrajectoryKind kind;
      double heading;
      double tilt;
      std::array<double, 2> origin;
    };
    const Leg legs[] = {
        {"desk_lateral", TrajectoryKind::Lateral, 90.0, 58.0, {-span / 2, -40.0}},
        {"desk_forward", TrajectoryKind::Forward, 0.0, 55.0, {-span / 2 - 40.0, 20.0}},
        {"desk_orbit", TrajectoryKind::Orbit, 0.0, 60.0, {0.0, 0.0}},
        {"desk_diagonal", TrajectoryKind::Lateral, 225.0, 52.0, {-span / 2.8, span / 2.8}},
    };
    for (const auto& leg : legs) {
      SceneSpec s = base;
      s.name = leg.name;
      s.boxes = town;
      s.texture_seed = 101;
      s.trajectory = leg.kind;
      s.heading_deg = leg.heading;
      s.tilt_deg = leg.tilt;
      s.origin = leg.origin;
      s.altitude = 22.0;
      s.speed = speed;
      s.orbit_radius = 70.0;
      specs.push_back(s);
    }
    return specs;
  }
  throw ConfigError("unknown scene preset '" + name + "' (demo, desk, A, B, AB)");
}

SceneSpec scene_from_config(const config::KeyValueConfig& cfg, SceneSpec s) {
  s.name = cfg.get_string("scene.name", s.name);
  s.texture_seed = static_cast<uint64_t>(cfg.get_int("scene.texture_seed",
                                                     static_cast<int64_t>(s.texture_seed)));
  s.texture_scale = cfg.get_double("scene.texture_scale", s.texture_scale);
  s.texture_octaves = static_cast<int>(cfg.get_int("scene.texture_octaves", s.texture_octaves));
  s.trajectory = parse_trajectory(cfg.get_string("scene.trajectory", to_string(s.trajectory)));
  s.speed = cfg.get_double("scene.speed", s.speed);
  s.altitude = cfg.get_double("scene.altitude", s.altitude);
  s.tilt_deg = cfg.get_double("scene.tilt_deg", s.tilt_deg);
  s.heading_deg = cfg.get_double("scene.heading_deg", s.heading_deg);
  const auto origin = cfg.get_doubles("scene.origin", {s.origin[0], s.origin[1]});
  if (origin.size() != 2) throw ConfigError("scene.origin expects two numbers");
  s.origin = {origin[0], origin[1]};
  s.orbit_radius = cfg.get_double("scene.orbit_radius", s.orbit_radius);
  s.frame_count = static_cast<int>(cfg.get_int("scene.frames", s.frame_count));
  s.offset = static_cast<int>(cfg.get_int("scene.offset", s.offset));
  s.noise = cfg.get_double("scene.noise", s.noise);
  s.noise_seed = static_cast<uint64_t>(cfg.get_int("scene.noise_seed",
                                                   static_cast<int64_t>(s.noise_seed)));
  s.brightness = cfg.get_double("scene.brightness", s.brightness);
  const auto light = cfg.get_doubles(
      "scene.light_direction",
      {s.light_direction[0], s.light_direction[1], s.light_direction[2]});
  if (light.size() != 3) throw ConfigError("scene.light_direction expects three numbers");
  s.light_direction = {light[0], light[1], light[2]};

  const int width = static_cast<int>(cfg.get_int("scene.width", s.intrinsics.width));
  const int height = static_cast<int>(cfg.get_int("scene.height", s.intrinsics.height));
  if (width != s.intrinsics.width || height != s.intrinsics.height) {
    s.intrinsics = {0.8 * width, 0.8 * width, (width - 1) / 2.0, (height - 1) / 2.0,
                    width, height};
  }
  s.intrinsics.fx = cfg.get_double("scene.fx", s.intrinsics.fx);
  s.intrinsics.fy = cfg.get_double("scene.fy", s.intrinsics.fy);
  s.intrinsics.cx = cfg.get_double("scene.cx", s.intrinsics.cx);
  s.intrinsics.cy = cfg.get_double("scene.cy", s.intrinsics.cy);

  if (const auto boxes = cfg.raw("scene.boxes")) {
    s.boxes.clear();
    std::stringstream all(*boxes);
    std::string item;
    while (std::getline(all, item, ';')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      std::stringstream fields(item);
      std::string f;
      std::vector<double> v;
      while (std::getline(fields, f, ',')) v.push_back(std::stod(f));
      if (v.size() != 5) throw ConfigError("scene.boxes entries are x0,y0,x1,y1,height");
      s.boxes.push_back({v[0], v[1], v[2], v[3], v[4]});
    }
  }
  if (cfg.contains("scene.random_boxes")) {
    // count, seed, extent, min_side, max_side, min_height, max_height
    const auto v = cfg.get_doubles("scene.random_boxes", {});
    if (v.size() != 7) {
      throw ConfigError(
          "scene.random_boxes expects count,seed,extent,min_side,max_side,min_height,max_height");
    }
    const auto more = random_boxes(static_cast<uint64_t>(v[1]), static_cast<int>(v[0]), v[2],
                                   v[3], v[4], v[5], v[6]);
    s.boxes.insert(s.boxes.end(), more.begin(), more.end());
  }
  return s;
}

}  // namespace aerodepth::synthcam
