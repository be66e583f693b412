#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "realism/tensor.hpp"

namespace realism {

using Plane = Eigen::ArrayXXf;  // rows = height, cols = width
using MaskGrid = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// 3-channel RGB raster with values in [0, 1].
struct Image {
  std::array<Plane, 3> channel;

  Image() = default;
  Image(Index height, Index width) {
    for (auto& c : channel) c = Plane::Zero(height, width);
  }

  Index height() const { return channel[0].rows(); }
  Index width() const { return channel[0].cols(); }
  Index pixels() const { return height() * width(); }
  bool empty() const { return pixels() == 0; }

  void set(Index r, Index c, float red, float green, float blue) {
    channel[0](r, c) = red;
    channel[1](r, c) = green;
    channel[2](r, c) = blue;
  }

  /// Luma (ITU-R BT.601 weights).
  Plane gray() const { return 0.299f * channel[0] + 0.587f * channel[1] + 0.114f * channel[2]; }

  bool operator==(const Image& o) const {
    for (int k = 0; k < 3; ++k) {
      if (channel[k].rows() != o.channel[k].rows() || channel[k].cols() != o.channel[k].cols()) return false;
      if ((channel[k] != o.channel[k]).any()) return false;
    }
    return true;
  }
};

Image load_image(const std::filesystem::path& path);
void save_image(const Image& image, const std::filesystem::path& path);

/// Single-channel masks persist as 8-bit images with values {0, 255}.
MaskGrid load_mask(const std::filesystem::path& path);
void save_mask(const MaskGrid& mask, const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centers.
Image resize_bilinear(const Image& image, Index height, Index width);
Plane resize_bilinear(const Plane& plane, Index height, Index width);

/// Box-filter (area) resampling, used for pyramid levels.
Plane resize_area(const Plane& plane, Index height, Index width);

MaskGrid resize_nearest(const MaskGrid& mask, Index height, Index width);

/// Quantizes to 8 bits and back, the same rounding a save/load cycle applies.
Image quantize8(const Image& image);

/// Packs images of identical size into an (N, 3, H, W) tensor.
template <typename Scalar>
Tensor<Scalar> to_tensor(std::span<const Image> images);

template <typename Scalar>
Image from_tensor(const Tensor<Scalar>& t, Index n);

}  // namespace realism
