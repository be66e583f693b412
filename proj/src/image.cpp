#include "realism/image.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>

#include "realism/error.hpp"

namespace realism {

namespace {

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError("cannot read image " + path.string());
  if (raw.depth() != CV_8U) throw IoError("expected 8-bit image: " + path.string());
  if (raw.channels() != 3) throw IoError("expected 3 color channels: " + path.string());
  Image out(raw.rows, raw.cols);
  for (int r = 0; r < raw.rows; ++r) {
    const auto* row = raw.ptr<cv::Vec3b>(r);
    for (int c = 0; c < raw.cols; ++c) {
      // OpenCV stores BGR.
      out.set(r, c, row[c][2] / 255.0f, row[c][1] / 255.0f, row[c][0] / 255.0f);
    }
  }
  return out;
}

void save_image(const Image& image, const std::filesystem::path& path) {
  cv::Mat raw(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_8UC3);
  for (int r = 0; r < raw.rows; ++r) {
    auto* row = raw.ptr<cv::Vec3b>(r);
    for (int c = 0; c < raw.cols; ++c) {
      row[c] = cv::Vec3b(to_byte(image.channel[2](r, c)), to_byte(image.channel[1](r, c)),
                         to_byte(image.channel[0](r, c)));
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), raw)) throw IoError("cannot write image " + path.string());
}

MaskGrid load_mask(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw IoError("cannot read mask " + path.string());
  MaskGrid out(raw.rows, raw.cols);
  for (int r = 0; r < raw.rows; ++r) {
    const auto* row = raw.ptr<std::uint8_t>(r);
    for (int c = 0; c < raw.cols; ++c) out(r, c) = row[c] >= 128 ? 1 : 0;
  }
  return out;
}

void save_mask(const MaskGrid& mask, const std::filesystem::path& path) {
  cv::Mat raw(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), CV_8UC1);
  for (int r = 0; r < raw.rows; ++r) {
    auto* row = raw.ptr<std::uint8_t>(r);
    for (int c = 0; c < raw.cols; ++c) row[c] = mask(r, c) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), raw)) throw IoError("cannot write mask " + path.string());
}

Plane resize_bilinear(const Plane& plane, Index height, Index width) {
  if (height <= 0 || width <= 0) throw InvalidArgument("resize target must be positive");
  if (plane.rows() == height && plane.cols() == width) return plane;
  const Index in_h = plane.rows(), in_w = plane.cols();
  const double sy = static_cast<double>(in_h) / height;
  const double sx = static_cast<double>(in_w) / width;
  Plane out(height, width);
  for (Index r = 0; r < height; ++r) {
    double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    Index y0 = static_cast<Index>(std::floor(fy));
    Index y1 = std::min(y0 + 1, in_h - 1);
    float ty = static_cast<float>(fy - y0);
    for (Index c = 0; c < width; ++c) {
      double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      Index x0 = static_cast<Index>(std::floor(fx));
      Index x1 = std::min(x0 + 1, in_w - 1);
      float tx = static_cast<float>(fx - x0);
      float top = plane(y0, x0) * (1 - tx) + plane(y0, x1) * tx;
      float bottom = plane(y1, x0) * (1 - tx) + plane(y1, x1) * tx;
      out(r, c) = top * (1 - ty) + bottom * ty;
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, Index height, Index width) {
  Image out;
  for (int k = 0; k < 3; ++k) out.channel[k] = resize_bilinear(image.channel[k], height, width);
  return out;
}

Plane resize_area(const Plane& plane, Index height, Index width) {
  if (height <= 0 || width <= 0) throw InvalidArgument("resize target must be positive");
  if (plane.rows() == height && plane.cols() == width) return plane;
  const Index in_h = plane.rows(), in_w = plane.cols();
  if (in_h % height == 0 && in_w % width == 0) {
    const Index fy = in_h / height, fx = in_w / width;
    Plane out(height, width);
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c) out(r, c) = plane.block(r * fy, c * fx, fy, fx).mean();
    return out;
  }
  // General case: exact overlap weights of source cells with each target cell.
  const double sy = static_cast<double>(in_h) / height;
  const double sx = static_cast<double>(in_w) / width;
  Plane out = Plane::Zero(height, width);
  for (Index r = 0; r < height; ++r) {
    const double y_lo = r * sy, y_hi = (r + 1) * sy;
    for (Index c = 0; c < width; ++c) {
      const double x_lo = c * sx, x_hi = (c + 1) * sx;
      double acc = 0.0;
      for (Index y = static_cast<Index>(y_lo); y < std::min<Index>(in_h, static_cast<Index>(std::ceil(y_hi))); ++y) {
        const double wy = std::min<double>(y + 1, y_hi) - std::max<double>(y, y_lo);
        if (wy <= 0) continue;
        for (Index x = static_cast<Index>(x_lo); x < std::min<Index>(in_w, static_cast<Index>(std::ceil(x_hi))); ++x) {
          const double wx = std::min<double>(x + 1, x_hi) - std::max<double>(x, x_lo);
          if (wx > 0) acc += wy * wx * plane(y, x);
        }
      }
      out(r, c) = static_cast<float>(acc / (sy * sx));
    }
  }
  return out;
}

MaskGrid resize_nearest(const MaskGrid& mask, Index height, Index width) {
  if (height <= 0 || width <= 0) throw InvalidArgument("resize target must be positive");
  if (mask.rows() == height && mask.cols() == width) return mask;
  MaskGrid out(height, width);
  for (Index r = 0; r < height; ++r) {
    Index sr = std::min<Index>(mask.rows() - 1, (r * mask.rows() * 2 + mask.rows()) / (2 * height));
    for (Index c = 0; c < width; ++c) {
      Index sc = std::min<Index>(mask.cols() - 1, (c * mask.cols() * 2 + mask.cols()) / (2 * width));
      out(r, c) = mask(sr, sc);
    }
  }
  return out;
}

Image quantize8(const Image& image) {
  Image out = image;
  for (auto& ch : out.channel) ch = ch.unaryExpr([](float v) { return to_byte(v) / 255.0f; });
  return out;
}

template <typename Scalar>
Tensor<Scalar> to_tensor(std::span<const Image> images) {
  if (images.empty()) throw EmptyBatch("no images to pack");
  const Index h = images[0].height(), w = images[0].width();
  Tensor<Scalar> t(Shape{static_cast<Index>(images.size()), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].height() != h || images[n].width() != w)
      throw ShapeMismatch("batch images differ in size");
    for (int k = 0; k < 3; ++k) {
      Scalar* dst = t.data.data() + (static_cast<Index>(n) * 3 + k) * h * w;
      // Row-major copy: tensor index is h * W + w.
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c) dst[r * w + c] = static_cast<Scalar>(images[n].channel[k](r, c));
    }
  }
  return t;
}

template <typename Scalar>
Image from_tensor(const Tensor<Scalar>& t, Index n) {
  if (t.shape.c != 3) throw ShapeMismatch("expected 3 channels, got " + t.shape.str());
  Image out(t.shape.h, t.shape.w);
  for (int k = 0; k < 3; ++k)
    for (Index r = 0; r < t.shape.h; ++r)
      for (Index c = 0; c < t.shape.w; ++c) out.channel[k](r, c) = static_cast<float>(t.at(n, k, r, c));
  return out;
}

template Tensor<float> to_tensor<float>(std::span<const Image>);
template Tensor<double> to_tensor<double>(std::span<const Image>);
template Image from_tensor<float>(const Tensor<float>&, Index);
template Image from_tensor<double>(const Tensor<double>&, Index);

}  // namespace realism
