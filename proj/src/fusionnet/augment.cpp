#include "realism/fusionnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "realism/error.hpp"

namespace realism::fusionnet {

WeakParams sample_weak(std::mt19937_64& rng, Index height, Index width) {
  WeakParams p;
  p.flip = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  const int mx = static_cast<int>(std::floor(0.125 * static_cast<double>(width)));
  const int my = static_cast<int>(std::floor(0.125 * static_cast<double>(height)));
  p.dx = std::uniform_int_distribution<int>(-mx, mx)(rng);
  p.dy = std::uniform_int_distribution<int>(-my, my)(rng);
  return p;
}

Image apply_weak(const Image& image, const WeakParams& p) {
  const Index h = image.height(), w = image.width();
  Image out(h, w);
  for (int k = 0; k < 3; ++k) {
    const Plane src = p.flip ? Plane(image.channel[k].rowwise().reverse()) : image.channel[k];
    for (Index c = 0; c < w; ++c) {
      const Index sc = c - p.dx;
      if (sc < 0 || sc >= w) continue;
      for (Index r = 0; r < h; ++r) {
        const Index sr = r - p.dy;
        if (sr >= 0 && sr < h) out.channel[k](r, c) = src(sr, sc);
      }
    }
  }
  return out;
}

std::string to_string(StrongOp op) {
  switch (op) {
    case StrongOp::brightness: return "brightness";
    case StrongOp::contrast: return "contrast";
    case StrongOp::color: return "color";
    case StrongOp::posterize: return "posterize";
    case StrongOp::sharpness: return "sharpness";
    case StrongOp::shear: return "shear";
    case StrongOp::translate: return "translate";
    case StrongOp::rotate: return "rotate";
  }
  return "?";
}

double identity_value(StrongOp op) {
  switch (op) {
    case StrongOp::brightness:
    case StrongOp::contrast:
    case StrongOp::color:
    case StrongOp::sharpness: return 1.0;
    case StrongOp::posterize: return 8.0;
    default: return 0.0;
  }
}

namespace {

double sample_value(StrongOp op, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double m = u(rng);
  switch (op) {
    case StrongOp::brightness:
    case StrongOp::contrast:
    case StrongOp::color:
    case StrongOp::sharpness: return 0.05 + 1.9 * m;
    case StrongOp::posterize: return std::floor(4.0 + 4.999 * m);
    case StrongOp::shear: return -0.3 + 0.6 * m;
    case StrongOp::translate: return -0.3 + 0.6 * m;
    case StrongOp::rotate: return -30.0 + 60.0 * m;
  }
  return identity_value(op);
}

Image clamp01(Image im) {
  for (auto& c : im.channel) c = c.cwiseMax(0.0f).cwiseMin(1.0f);
  return im;
}

Image blend(const Image& degenerate, const Image& image, float factor) {
  Image out = image;
  for (int k = 0; k < 3; ++k) out.channel[k] = degenerate.channel[k] + factor * (image.channel[k] - degenerate.channel[k]);
  return clamp01(std::move(out));
}

// Inverse-mapped bilinear warp with zero fill; (r, c) in output samples source at map(r, c).
template <typename Map>
Image warp(const Image& image, Map map) {
  const Index h = image.height(), w = image.width();
  Image out(h, w);
  for (Index c = 0; c < w; ++c) {
    for (Index r = 0; r < h; ++r) {
      auto [sr, sc] = map(static_cast<double>(r), static_cast<double>(c));
      const double fr = std::floor(sr), fc = std::floor(sc);
      const double ar = sr - fr, ac = sc - fc;
      const Index r0 = static_cast<Index>(fr), c0 = static_cast<Index>(fc);
      for (int k = 0; k < 3; ++k) {
        double acc = 0;
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            const Index rr = r0 + i, cc = c0 + j;
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
            acc += (i ? ar : 1 - ar) * (j ? ac : 1 - ac) * image.channel[k](rr, cc);
          }
        out.channel[k](r, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

}  // namespace

Image apply_strong_op(const Image& image, const StrongOpParams& op) {
  if (op.value == identity_value(op.op)) return image;
  const float f = static_cast<float>(op.value);
  const Index h = image.height(), w = image.width();
  switch (op.op) {
    case StrongOp::brightness: return blend(Image(h, w), image, f);
    case StrongOp::contrast: {
      const float mean = image.gray().mean();
      Image flat(h, w);
      for (auto& c : flat.channel) c.setConstant(mean);
      return blend(flat, image, f);
    }
    case StrongOp::color: {
      const Plane g = image.gray();
      Image gray(h, w);
      for (auto& c : gray.channel) c = g;
      return blend(gray, image, f);
    }
    case StrongOp::posterize: {
      const int bits = std::clamp(static_cast<int>(op.value), 1, 8);
      const float levels = static_cast<float>(1 << bits);
      Image out = image;
      for (auto& c : out.channel)
        c = ((c.cwiseMin(1.0f - 1e-6f) * levels).floor() / (levels - 1)).cwiseMin(1.0f);
      return out;
    }
    case StrongOp::sharpness: {
      // Degenerate image is a 3x3 smoothing of the interior; borders are kept.
      Image smooth = image;
      for (int k = 0; k < 3; ++k)
        for (Index c = 1; c + 1 < w; ++c)
          for (Index r = 1; r + 1 < h; ++r) {
            float acc = 5.0f * image.channel[k](r, c);
            for (int dr = -1; dr <= 1; ++dr)
              for (int dc = -1; dc <= 1; ++dc)
                if (dr || dc) acc += image.channel[k](r + dr, c + dc);
            smooth.channel[k](r, c) = acc / 13.0f;
          }
      return blend(smooth, image, f);
    }
    case StrongOp::shear: {
      const double cy = (h - 1) / 2.0;
      return warp(image, [&](double r, double c) { return std::pair{r, c + op.value * (r - cy)}; });
    }
    case StrongOp::translate: {
      const double shift = std::round(op.value * static_cast<double>(w));
      return warp(image, [&](double r, double c) { return std::pair{r, c - shift}; });
    }
    case StrongOp::rotate: {
      const double th = op.value * std::numbers::pi / 180.0, cs = std::cos(th), sn = std::sin(th);
      const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
      return warp(image, [&](double r, double c) {
        const double y = r - cy, x = c - cx;
        return std::pair{cy + cs * y - sn * x, cx + sn * y + cs * x};
      });
    }
  }
  return image;
}

StrongParams sample_strong(std::mt19937_64& rng, Index height, Index width) {
  StrongParams p;
  std::uniform_int_distribution<int> pick(0, kStrongPoolSize - 1);
  const int a = pick(rng);
  int b = std::uniform_int_distribution<int>(0, kStrongPoolSize - 2)(rng);
  if (b >= a) ++b;
  p.ops[0].op = static_cast<StrongOp>(a);
  p.ops[0].value = sample_value(p.ops[0].op, rng);
  p.ops[1].op = static_cast<StrongOp>(b);
  p.ops[1].value = sample_value(p.ops[1].op, rng);
  p.cutout_side = std::min<Index>(std::max<Index>(1, static_cast<Index>(std::lround(0.25 * width))), std::min(height, width));
  p.cutout_row = std::uniform_int_distribution<Index>(0, height - p.cutout_side)(rng);
  p.cutout_col = std::uniform_int_distribution<Index>(0, width - p.cutout_side)(rng);
  return p;
}

Image apply_strong(const Image& image, const StrongParams& p) {
  Image out = image;
  for (const auto& op : p.ops) out = apply_strong_op(out, op);
  if (p.cutout_side > 0) {
    if (p.cutout_row < 0 || p.cutout_col < 0 || p.cutout_row + p.cutout_side > out.height() ||
        p.cutout_col + p.cutout_side > out.width())
      throw InvalidArgument("cutout square outside the image");
    for (auto& c : out.channel) c.block(p.cutout_row, p.cutout_col, p.cutout_side, p.cutout_side).setZero();
  }
  return out;
}

}  // namespace realism::fusionnet
