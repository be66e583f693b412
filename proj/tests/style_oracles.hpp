#pragma once

#include <random>
#include <string>
#include <vector>

#include "realism/styledist/metrics.hpp"

namespace realism::testing {

using styledist::StyleCodec;
using styledist::StyleVector;

/// Direct transcription of the per-image averages, one pair at a time.
inline double d_style_oracle(const std::vector<StyleVector>& a, const std::vector<StyleVector>& b) {
  const double d = static_cast<double>(a[0].values.size());
  double da = 0, db = 0;
  for (const auto& x : a) {
    double acc = 0;
    for (const auto& y : b) {
      double se = 0;
      for (Index k = 0; k < x.values.size(); ++k) se += (x.values[k] - y.values[k]) * (x.values[k] - y.values[k]);
      double is = 0;
      for (Index k = 0; k < x.values.size(); ++k) is += x.values[k] * x.values[k];
      acc += (se / d) / (is / d);
    }
    da += acc / b.size();
  }
  for (const auto& y : b) {
    double acc = 0;
    for (const auto& x : a) {
      double se = 0, is = 0;
      for (Index k = 0; k < y.values.size(); ++k) {
        se += (x.values[k] - y.values[k]) * (x.values[k] - y.values[k]);
        is += y.values[k] * y.values[k];
      }
      acc += (se / d) / (is / d);
    }
    db += acc / a.size();
  }
  return (da / a.size() + db / b.size()) / 2;
}

inline std::vector<StyleVector> random_set(int n, int d, double mean, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(mean, 1.0);
  std::vector<StyleVector> out;
  for (int i = 0; i < n; ++i) {
    StyleVector s;
    s.values.resize(d);
    for (auto& v : s.values) v = nd(rng);
    s.image_id = "v" + std::to_string(i);
    out.push_back(s);
  }
  return out;
}

/// Content is the image minus a brightness offset plus fixed noise; style is
/// the offset, added back uniformly by the decoder.
class ShiftCodec final : public StyleCodec {
 public:
  ShiftCodec(double offset, double noise, bool ignore_style = false)
      : offset_(offset), noise_(noise), ignore_(ignore_style) {}
  int style_dim() const override { return 2; }
  std::string encoder_id() const override { return "shift"; }
  Eigen::VectorXf encode_content(const Image& im) const override {
    Eigen::VectorXf c(3 * im.pixels() + 2);
    for (int k = 0; k < 3; ++k)
      for (Index i = 0; i < im.pixels(); ++i)
        c[k * im.pixels() + i] = im.channel[k](i) - static_cast<float>(offset_) + ((i % 2) ? 1 : -1) * static_cast<float>(noise_);
    c[c.size() - 2] = static_cast<float>(im.height());
    c[c.size() - 1] = static_cast<float>(im.width());
    return c;
  }
  Eigen::VectorXd encode_style(const Image&) const override { return Eigen::VectorXd::Constant(2, offset_); }
  Image decode(const Eigen::VectorXf& c, const Eigen::VectorXd& s) const override {
    const Index h = static_cast<Index>(c[c.size() - 2]), w = static_cast<Index>(c[c.size() - 1]);
    Image out(h, w);
    const float add = ignore_ ? static_cast<float>(offset_) : static_cast<float>(s.mean());
    for (int k = 0; k < 3; ++k)
      for (Index i = 0; i < h * w; ++i) out.channel[k](i) = c[k * h * w + i] + add;
    return out;
  }

 private:
  double offset_, noise_;
  bool ignore_;
};

}  // namespace realism::testing
