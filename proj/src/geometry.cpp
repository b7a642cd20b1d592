#include "aerodepth/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "aerodepth/errors.hpp"

namespace aerodepth::geometry {

namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace {

bool all_finite(std::initializer_list<double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// Broadcasts (fx, fy, cx, cy) to [B, 4].
torch::Tensor intrinsics_rows(const torch::Tensor& intrinsics, int64_t batch) {
  if (intrinsics.dim() == 1 && intrinsics.size(0) == 4) {
    return intrinsics.unsqueeze(0).expand({batch, 4});
  }
  if (intrinsics.dim() == 2 && intrinsics.size(1) == 4 &&
      (intrinsics.size(0) == batch || intrinsics.size(0) == 1)) {
    return intrinsics.expand({batch, 4});
  }
  throw ShapeError("intrinsics must be [4] or [B, 4], got " +
                   std::to_string(intrinsics.dim()) + "-d tensor");
}

torch::Tensor transform_rows(const torch::Tensor& transform, int64_t batch) {
  if (transform.dim() == 2 && transform.size(0) == 4 && transform.size(1) == 4) {
    return transform.unsqueeze(0).expand({batch, 4, 4});
  }
  if (transform.dim() == 3 && transform.size(1) == 4 && transform.size(2) == 4 &&
      (transform.size(0) == batch || transform.size(0) == 1)) {
    return transform.expand({batch, 4, 4});
  }
  throw ShapeError("transform must be [4, 4] or [B, 4, 4]");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d k;
  k << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return k;
}

}  // namespace

// ---------------------------------------------------------------------------
// CameraIntrinsics

void CameraIntrinsics::validate() const {
  if (!all_finite({fx, fy, cx, cy})) {
    throw InvalidInputError("camera intrinsics must be finite");
  }
  if (fx <= 0.0 || fy <= 0.0) {
    throw InvalidInputError("focal lengths must be positive");
  }
  if (width < 2 || height < 2) {
    throw InvalidInputError("image must be at least 2x2 pixels");
  }
}

CameraIntrinsics CameraIntrinsics::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidInputError("scale factor must be positive");
  }
  CameraIntrinsics out = *this;
  out.fx *= factor;
  out.fy *= factor;
  out.cx *= factor;
  out.cy *= factor;
  out.width = static_cast<int>(std::lround(width * factor));
  out.height = static_cast<int>(std::lround(height * factor));
  return out;
}

CameraIntrinsics CameraIntrinsics::cropped_and_resized(double x0, double y0,
                                                       double crop_width,
                                                       double crop_height,
                                                       int out_width,
                                                       int out_height) const {
  if (!(crop_width > 0.0) || !(crop_height > 0.0) || out_width < 2 ||
      out_height < 2) {
    throw InvalidInputError("crop window and output size must be positive");
  }
  const double sx = out_width / crop_width;
  const double sy = out_height / crop_height;
  CameraIntrinsics out;
  out.fx = fx * sx;
  out.fy = fy * sy;
  out.cx = (cx + 0.5 - x0) * sx - 0.5;
  out.cy = (cy + 0.5 - y0) * sy - 0.5;
  out.width = out_width;
  out.height = out_height;
  return out;
}

CameraIntrinsics CameraIntrinsics::resized(int out_width, int out_height) const {
  return cropped_and_resized(0.0, 0.0, width, height, out_width, out_height);
}

torch::Tensor CameraIntrinsics::to_tensor(torch::TensorOptions options) const {
  return torch::tensor({fx, fy, cx, cy}, torch::kFloat64).to(options.dtype());
}

Eigen::Vector2d CameraIntrinsics::project(const Eigen::Vector3d& p) const {
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

CameraIntrinsics parse_intrinsics(std::istream& in) {
  std::map<std::string, double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError("intrinsics line " + std::to_string(line_no) +
                    ": expected key = value");
    }
    std::istringstream key_stream(line.substr(0, eq));
    std::string key;
    key_stream >> key;
    std::istringstream value_stream(line.substr(eq + 1));
    double value = 0.0;
    if (!(value_stream >> value)) {
      throw IoError("intrinsics line " + std::to_string(line_no) +
                    ": value is not a number");
    }
    static const char* kKeys[] = {"fx", "fy", "cx", "cy", "width", "height"};
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw IoError("intrinsics: unknown key '" + key + "'");
    }
    values[key] = value;
  }
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
    if (!values.count(key)) {
      throw IoError(std::string("intrinsics: missing key '") + key + "'");
    }
  }
  CameraIntrinsics k{values["fx"],
                     values["fy"],
                     values["cx"],
                     values["cy"],
                     static_cast<int>(values["width"]),
                     static_cast<int>(values["height"])};
  k.validate();
  return k;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open intrinsics file " + path.string());
  return parse_intrinsics(in);
}

void write_intrinsics(const std::filesystem::path& path,
                      const CameraIntrinsics& k) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write intrinsics file " + path.string());
  out.precision(17);
  out << "# pinhole intrinsics in pixels\n"
      << "fx = " << k.fx << "\nfy = " << k.fy << "\ncx = " << k.cx
      << "\ncy = " << k.cy << "\nwidth = " << k.width
      << "\nheight = " << k.height << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// PoseSE3

PoseSE3 PoseSE3::from_matrix(const Eigen::Matrix4d& transform) {
  const Eigen::Matrix3d r = transform.topLeftCorner<3, 3>();
  const Eigen::AngleAxisd aa(r);
  const Eigen::Vector3d w = aa.angle() * aa.axis();
  PoseSE3 pose;
  pose.rotation = {w.x(), w.y(), w.z()};
  pose.translation = {transform(0, 3), transform(1, 3), transform(2, 3)};
  return pose;
}

PoseSE3 PoseSE3::from_tensor(const torch::Tensor& six) {
  auto v = six.detach().to(torch::kCPU, torch::kFloat64).contiguous().view(-1);
  if (v.numel() != 6) throw ShapeError("pose tensor must hold 6 values");
  const double* p = v.data_ptr<double>();
  return PoseSE3{{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};
}

Eigen::Matrix3d PoseSE3::rotation_matrix() const {
  const Eigen::Vector3d w(rotation[0], rotation[1], rotation[2]);
  const double angle = w.norm();
  if (angle < kSmallAngle) {
    const Eigen::Matrix3d k = skew(w);
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Eigen::Matrix4d PoseSE3::matrix() const { return pose_to_matrix(*this); }

PoseSE3 PoseSE3::inverse() const {
  Eigen::Matrix4d m = matrix();
  Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = m.topLeftCorner<3, 3>().transpose();
  inv.topLeftCorner<3, 3>() = rt;
  inv.topRightCorner<3, 1>() = -rt * m.topRightCorner<3, 1>();
  return from_matrix(inv);
}

PoseSE3 PoseSE3::compose(const PoseSE3& first) const {
  return from_matrix(matrix() * first.matrix());
}

double PoseSE3::rotation_angle() const {
  return std::sqrt(rotation[0] * rotation[0] + rotation[1] * rotation[1] +
                   rotation[2] * rotation[2]);
}

torch::Tensor PoseSE3::to_tensor(torch::TensorOptions options) const {
  return torch::tensor({rotation[0], rotation[1], rotation[2], translation[0],
                        translation[1], translation[2]},
                       torch::kFloat64)
      .to(options.dtype());
}

Eigen::Matrix4d pose_to_matrix(const PoseSE3& pose) {
  for (double v : pose.rotation) {
    if (!std::isfinite(v)) throw InvalidInputError("non-finite rotation");
  }
  for (double v : pose.translation) {
    if (!std::isfinite(v)) throw InvalidInputError("non-finite translation");
  }
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = pose.rotation_matrix();
  m.topRightCorner<3, 1>() = Eigen::Vector3d(
      pose.translation[0], pose.translation[1], pose.translation[2]);
  return m;
}

torch::Tensor pose_to_matrix(const torch::Tensor& poses) {
  if (poses.dim() != 2 || poses.size(1) != 6) {
    throw ShapeError("poses must be [B, 6]");
  }
  if (!torch::isfinite(poses).all().item<bool>()) {
    throw InvalidInputError("non-finite pose parameters");
  }
  const auto batch = poses.size(0);
  const auto w = poses.index({Slice(), Slice(0, 3)});
  const auto t = poses.index({Slice(), Slice(3, 6)});

  const auto theta2 = (w * w).sum(1);
  const auto small = theta2 < kSmallAngle * kSmallAngle;
  const auto safe_theta2 = torch::where(small, torch::ones_like(theta2), theta2);
  const auto theta = torch::sqrt(safe_theta2);
  const auto a = torch::where(small, 1.0 - theta2 / 6.0, torch::sin(theta) / theta);
  const auto b = torch::where(small, 0.5 - theta2 / 24.0,
                              (1.0 - torch::cos(theta)) / safe_theta2);

  const auto wx = w.select(1, 0);
  const auto wy = w.select(1, 1);
  const auto wz = w.select(1, 2);
  const auto zero = torch::zeros_like(wx);
  const auto k = torch::stack({zero, -wz, wy, wz, zero, -wx, -wy, wx, zero}, 1)
                     .view({batch, 3, 3});
  const auto eye = torch::eye(3, poses.options()).unsqueeze(0);
  const auto r = eye + a.view({batch, 1, 1}) * k +
                 b.view({batch, 1, 1}) * torch::bmm(k, k);

  const auto top = torch::cat({r, t.unsqueeze(2)}, 2);
  auto bottom = torch::zeros({batch, 1, 4}, poses.options());
  bottom.index_put_({Slice(), 0, 3}, 1.0);
  return torch::cat({top, bottom}, 1);
}

// ---------------------------------------------------------------------------
// Warping

torch::Tensor pixel_grid(int64_t batch, int64_t height, int64_t width,
                         torch::TensorOptions options) {
  const auto u = torch::arange(width, options).view({1, width}).expand({height, width});
  const auto v = torch::arange(height, options).view({height, 1}).expand({height, width});
  return torch::stack({u, v}, -1).unsqueeze(0).expand({batch, height, width, 2});
}

torch::Tensor backproject(const torch::Tensor& depth,
                          const torch::Tensor& intrinsics) {
  if (depth.dim() != 4 || depth.size(1) != 1) {
    throw ShapeError("depth must be [B, 1, H, W]");
  }
  const auto batch = depth.size(0);
  const auto height = depth.size(2);
  const auto width = depth.size(3);
  const auto k = intrinsics_rows(intrinsics.to(depth.dtype()), batch);
  const auto fx = k.select(1, 0).view({batch, 1, 1, 1});
  const auto fy = k.select(1, 1).view({batch, 1, 1, 1});
  const auto cx = k.select(1, 2).view({batch, 1, 1, 1});
  const auto cy = k.select(1, 3).view({batch, 1, 1, 1});
  const auto opts = depth.options();
  const auto u = torch::arange(width, opts).view({1, 1, 1, width});
  const auto v = torch::arange(height, opts).view({1, 1, height, 1});
  const auto x = (u - cx) / fx * depth;
  const auto y = (v - cy) / fy * depth;
  return torch::cat({x, y, depth}, 1);
}

torch::Tensor backproject(const torch::Tensor& depth,
                          const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  if (depth.dim() != 4 || depth.size(2) != intrinsics.height ||
      depth.size(3) != intrinsics.width) {
    throw ShapeError("depth map size does not match the camera intrinsics");
  }
  return backproject(depth, intrinsics.to_tensor(depth.options()));
}

SampleGrid project(const torch::Tensor& points, const torch::Tensor& transform,
                   const torch::Tensor& intrinsics, int64_t width,
                   int64_t height) {
  if (points.dim() != 4 || points.size(1) != 3) {
    throw ShapeError("points must be [B, 3, H, W]");
  }
  const auto batch = points.size(0);
  const auto h = points.size(2);
  const auto w = points.size(3);
  const auto t = transform_rows(transform.to(points.dtype()), batch);
  const auto k = intrinsics_rows(intrinsics.to(points.dtype()), batch);

  const auto flat = points.reshape({batch, 3, h * w});
  const auto rot = t.index({Slice(), Slice(0, 3), Slice(0, 3)});
  const auto trans = t.index({Slice(), Slice(0, 3), Slice(3, 4)});
  const auto moved = torch::bmm(rot, flat) + trans;

  const auto x = moved.select(1, 0);
  const auto y = moved.select(1, 1);
  const auto z = moved.select(1, 2);
  const auto in_front = z > kMinProjectionDepth;
  const auto z_safe = torch::clamp_min(z, kMinProjectionDepth);

  const auto fx = k.select(1, 0).view({batch, 1});
  const auto fy = k.select(1, 1).view({batch, 1});
  const auto cx = k.select(1, 2).view({batch, 1});
  const auto cy = k.select(1, 3).view({batch, 1});
  const auto zero = torch::zeros_like(x);
  const auto u = torch::where(in_front, fx * x / z_safe + cx, zero);
  const auto v = torch::where(in_front, fy * y / z_safe + cy, zero);

  // Pixels that reproject onto the border land a rounding error outside it.
  constexpr double slack = 1e-4;
  const auto inside = (u >= -slack) & (u <= static_cast<double>(width - 1) + slack) &
                      (v >= -slack) & (v <= static_cast<double>(height - 1) + slack);
  SampleGrid grid;
  grid.coords = torch::stack({u, v}, -1).view({batch, h, w, 2});
  grid.valid = (in_front & inside).view({batch, 1, h, w});
  return grid;
}

SampleGrid project(const torch::Tensor& points, const PoseSE3& pose,
                   const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  const auto opts = points.options();
  const Eigen::Matrix4d m = pose_to_matrix(pose);
  auto transform = torch::empty({4, 4}, torch::kFloat64);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) transform[r][c] = m(r, c);
  }
  return project(points, transform.to(opts.dtype()), intrinsics.to_tensor(opts),
                 intrinsics.width, intrinsics.height);
}

SampledImage bilinear_sample(const torch::Tensor& source,
                             const SampleGrid& grid) {
  if (source.dim() != 4) throw ShapeError("source must be [B, C, H, W]");
  const auto& coords = grid.coords;
  if (coords.dim() != 4 || coords.size(3) != 2 ||
      coords.size(0) != source.size(0)) {
    throw ShapeError("sample grid must be [B, H, W, 2] with matching batch");
  }
  const auto batch = source.size(0);
  const auto channels = source.size(1);
  const auto src_h = source.size(2);
  const auto src_w = source.size(3);
  if (src_h < 2 || src_w < 2) throw ShapeError("source must be at least 2x2");
  const auto h = coords.size(1);
  const auto w = coords.size(2);

  const auto c = coords.to(source.dtype());
  const auto u = c.select(3, 0).clamp(0.0, static_cast<double>(src_w - 1));
  const auto v = c.select(3, 1).clamp(0.0, static_cast<double>(src_h - 1));
  // Left/top neighbour; the last column/row reuses the previous cell with a
  // unit weight so every lookup stays inside the image.
  const auto x0 = torch::floor(u).clamp_max(static_cast<double>(src_w - 2)).detach();
  const auto y0 = torch::floor(v).clamp_max(static_cast<double>(src_h - 2)).detach();
  const auto wx = (u - x0).view({batch, 1, h * w});
  const auto wy = (v - y0).view({batch, 1, h * w});

  const auto xi = x0.to(torch::kLong).view({batch, 1, h * w});
  const auto yi = y0.to(torch::kLong).view({batch, 1, h * w});
  const auto flat = source.reshape({batch, channels, src_h * src_w});
  auto gather = [&](const torch::Tensor& yy, const torch::Tensor& xx) {
    return flat.gather(2, (yy * src_w + xx).expand({batch, channels, h * w}));
  };
  const auto i00 = gather(yi, xi);
  const auto i01 = gather(yi, xi + 1);
  const auto i10 = gather(yi + 1, xi);
  const auto i11 = gather(yi + 1, xi + 1);
  const auto top = i00 + wx * (i01 - i00);
  const auto bottom = i10 + wx * (i11 - i10);
  const auto interp = (top + wy * (bottom - top)).view({batch, channels, h, w});

  SampledImage out;
  out.valid = grid.valid;
  out.image = interp * grid.valid.to(source.dtype());
  return out;
}

SampledImage project_and_sample(const torch::Tensor& source,
                                const torch::Tensor& depth,
                                const torch::Tensor& poses,
                                const torch::Tensor& intrinsics) {
  if (source.dim() != 4 || depth.dim() != 4) {
    throw ShapeError("source and depth must be 4-d");
  }
  if (source.size(2) != depth.size(2) || source.size(3) != depth.size(3)) {
    throw ShapeError("depth must be upsampled to the source resolution first");
  }
  const auto points = backproject(depth, intrinsics);
  const auto transform = pose_to_matrix(poses.to(depth.dtype()));
  const auto grid =
      project(points, transform, intrinsics, source.size(3), source.size(2));
  return bilinear_sample(source, grid);
}

SampledImage project_and_sample(const torch::Tensor& source,
                                const torch::Tensor& depth,
                                const PoseSE3& pose,
                                const CameraIntrinsics& intrinsics) {
  intrinsics.validate();
  if (source.size(2) != intrinsics.height || source.size(3) != intrinsics.width) {
    throw ShapeError("source image size does not match the intrinsics");
  }
  const auto batch = source.size(0);
  const auto opts = depth.options();
  return project_and_sample(source, depth,
                            pose.to_tensor(opts).unsqueeze(0).expand({batch, 6}),
                            intrinsics.to_tensor(opts));
}

torch::Tensor upsample_to(const torch::Tensor& map, int64_t height,
                          int64_t width) {
  if (map.size(2) == height && map.size(3) == width) return map;
  return F::interpolate(map, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{height, width})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}

}  // namespace aerodepth::geometry
