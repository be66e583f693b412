#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "realism/image.hpp"

namespace realism::styledist {

struct StyleVector {
  Eigen::VectorXd values;
  std::string encoder_id;
  std::string image_id;

  int d() const { return static_cast<int>(values.size()); }
};

/// ||f||^2 / d
double signal_strength(const Eigen::VectorXd& f);
/// ||f - g||^2 / d; DimensionMismatch on unequal d.
double style_mse(const Eigen::VectorXd& f, const Eigen::VectorXd& g);

struct StyleDistanceReport {
  double d_a = 0.0;
  double d_b = 0.0;
  double d_style = 0.0;
  std::vector<double> per_a;  // D_A of each a_i
  std::vector<double> per_b;
};

/// D_A averages, over a in A, the mean style MSE to B normalized by I_S(a);
/// D_B likewise with normalization by I_S(b); D_style = (D_A + D_B) / 2.
/// ZeroSignal names the first vector with I_S = 0.
StyleDistanceReport d_style(std::span<const StyleVector> a, std::span<const StyleVector> b);

/// Encoder/decoder view of a trained disentangler for one domain.
class StyleCodec {
 public:
  virtual ~StyleCodec() = default;
  virtual int style_dim() const = 0;
  virtual std::string encoder_id() const = 0;
  /// Opaque content code of an image.
  virtual Eigen::VectorXf encode_content(const Image& image) const = 0;
  virtual Eigen::VectorXd encode_style(const Image& image) const = 0;
  virtual Image decode(const Eigen::VectorXf& content, const Eigen::VectorXd& style) const = 0;
};

StyleVector encode_style(const StyleCodec& codec, const Image& image, std::string image_id = {});

/// Mean squared difference over all pixels and channels.
double image_mse(const Image& a, const Image& b);

inline constexpr double kMinReconstructionError = 1e-12;

/// MSE(x, decode(content, 1)) / MSE(x, decode(content, E_S(x))).
double iob(const Image& image, const StyleCodec& codec);
double mean_iob(std::span<const Image> images, const StyleCodec& codec);

/// Per-image IOB values, in order.
std::vector<double> iob_values(std::span<const Image> images, const StyleCodec& codec);

/// CSV with columns id, encoder_id, d, v1..vd.
void write_style_csv(const std::filesystem::path& path, std::span<const StyleVector> vectors);
std::vector<StyleVector> read_style_csv(const std::filesystem::path& path);

}  // namespace realism::styledist
