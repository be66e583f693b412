#pragma once

#include <array>
#include <random>
#include <string>

#include "realism/image.hpp"

namespace realism::fusionnet {

struct WeakParams {
  bool flip = false;
  int dx = 0;  // columns, positive moves content right
  int dy = 0;  // rows, positive moves content down
};

/// Horizontal flip with probability 0.5, then an integer shift of up to
/// 12.5% of each axis with zero fill.
WeakParams sample_weak(std::mt19937_64& rng, Index height, Index width);
Image apply_weak(const Image& image, const WeakParams& p);
inline Image weak_augment(const Image& image, std::mt19937_64& rng) {
  return apply_weak(image, sample_weak(rng, image.height(), image.width()));
}

enum class StrongOp { brightness, contrast, color, posterize, sharpness, shear, translate, rotate };
inline constexpr int kStrongPoolSize = 8;
std::string to_string(StrongOp op);

/// `value` is in the op's natural unit; identity values are 1 for the
/// brightness/contrast/color/sharpness factors, 8 bits for posterize and 0
/// for shear (x-shear coefficient), translate (fraction of width) and rotate (degrees).
struct StrongOpParams {
  StrongOp op = StrongOp::brightness;
  double value = 1.0;
};

struct StrongParams {
  std::array<StrongOpParams, 2> ops{};
  Index cutout_row = 0, cutout_col = 0, cutout_side = 0;
};

double identity_value(StrongOp op);

/// Two distinct ops drawn from the pool with random magnitudes, then one
/// Cutout square of side 25% of the width placed fully inside the image.
StrongParams sample_strong(std::mt19937_64& rng, Index height, Index width);
Image apply_strong_op(const Image& image, const StrongOpParams& op);
Image apply_strong(const Image& image, const StrongParams& p);
inline Image strong_augment(const Image& image, std::mt19937_64& rng) {
  return apply_strong(image, sample_strong(rng, image.height(), image.width()));
}

}  // namespace realism::fusionnet
