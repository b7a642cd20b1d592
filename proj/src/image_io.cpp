#include "aerodepth/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "aerodepth/errors.hpp"

namespace aerodepth::io {

namespace {

// [C, H, W] float -> H x W x C float Mat (RGB channel order kept).
cv::Mat to_mat(const torch::Tensor& image) {
  const auto hwc = image.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  const int h = static_cast<int>(hwc.size(0));
  const int w = static_cast<int>(hwc.size(1));
  const int c = static_cast<int>(hwc.size(2));
  return cv::Mat(h, w, CV_32FC(c), hwc.data_ptr<float>()).clone();
}

torch::Tensor from_mat(const cv::Mat& mat) {
  cv::Mat f;
  mat.convertTo(f, CV_32F);
  if (!f.isContinuous()) f = f.clone();
  const int c = f.channels();
  return torch::from_blob(f.data, {f.rows, f.cols, c}, torch::kFloat32)
      .permute({2, 0, 1})
      .contiguous()
      .clone();
}

}  // namespace

torch::Tensor read_image(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat(rgb) / 255.0f;
}

void write_image(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || (image.size(0) != 3 && image.size(0) != 1)) {
    throw ShapeError("write_image expects [3, H, W] or [1, H, W]");
  }
  const auto bytes = (image.detach().to(torch::kCPU, torch::kFloat32).clamp(0.0, 1.0) * 255.0f)
                         .round()
                         .to(torch::kUInt8)
                         .permute({1, 2, 0})
                         .contiguous();
  const int h = static_cast<int>(bytes.size(0));
  const int w = static_cast<int>(bytes.size(1));
  const int c = static_cast<int>(bytes.size(2));
  cv::Mat mat(h, w, CV_8UC(c), bytes.data_ptr<uint8_t>());
  cv::Mat out;
  if (c == 3) {
    cv::cvtColor(mat, out, cv::COLOR_RGB2BGR);
  } else {
    out = mat;
  }
  if (!cv::imwrite(path.string(), out)) {
    throw IoError("cannot write image " + path.string());
  }
}

torch::Tensor resize_image(const torch::Tensor& image, int width, int height) {
  if (image.dim() != 3) throw ShapeError("resize_image expects [C, H, W]");
  if (image.size(1) == height && image.size(2) == width) return image;
  const cv::Mat src = to_mat(image);
  const bool shrink = width <= src.cols && height <= src.rows;
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(width, height), 0, 0,
             shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
  if (dst.channels() == 1 && dst.dims == 2 && image.size(0) == 1) {
    return from_mat(dst.reshape(1));
  }
  return from_mat(dst);
}

torch::Tensor quantize_8bit(const torch::Tensor& image) {
  return (image.clamp(0.0, 1.0) * 255.0).round() / 255.0;
}

}  // namespace aerodepth::io
