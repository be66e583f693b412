#include "realism/styledist/metrics.hpp"

#include <fstream>

#include "realism/error.hpp"
#include "realism/format.hpp"

namespace realism::styledist {

double signal_strength(const Eigen::VectorXd& f) {
  if (f.size() == 0) throw DimensionMismatch("style vector of length 0");
  return f.squaredNorm() / static_cast<double>(f.size());
}

double style_mse(const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  if (f.size() != g.size())
    throw DimensionMismatch("style vectors of length " + std::to_string(f.size()) + " and " + std::to_string(g.size()));
  if (f.size() == 0) throw DimensionMismatch("style vector of length 0");
  return (f - g).squaredNorm() / static_cast<double>(f.size());
}

namespace {

std::string label(const StyleVector& v, const char* set, std::size_t i) {
  return v.image_id.empty() ? std::string(set) + "[" + std::to_string(i) + "]" : v.image_id;
}

std::vector<double> one_side(std::span<const StyleVector> from, std::span<const StyleVector> to, const char* set) {
  std::vector<double> out;
  out.reserve(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    const double is = signal_strength(from[i].values);
    if (is == 0.0) throw ZeroSignal("style vector of '" + label(from[i], set, i) + "' has zero signal strength");
    double sum = 0.0;
    for (const auto& g : to) sum += style_mse(from[i].values, g.values);
    out.push_back(sum / static_cast<double>(to.size()) / is);
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

StyleDistanceReport d_style(std::span<const StyleVector> a, std::span<const StyleVector> b) {
  if (a.empty() || b.empty()) throw DataError("d_style needs two non-empty style sets");
  StyleDistanceReport r;
  r.per_a = one_side(a, b, "A");
  r.per_b = one_side(b, a, "B");
  r.d_a = mean_of(r.per_a);
  r.d_b = mean_of(r.per_b);
  r.d_style = (r.d_a + r.d_b) / 2.0;
  return r;
}

StyleVector encode_style(const StyleCodec& codec, const Image& image, std::string image_id) {
  return {codec.encode_style(image), codec.encoder_id(), std::move(image_id)};
}

double image_mse(const Image& a, const Image& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeMismatch("image_mse of differently sized images");
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += (a.channel[k] - b.channel[k]).cast<double>().square().sum();
  return s / (3.0 * static_cast<double>(a.pixels()));
}

double iob(const Image& image, const StyleCodec& codec) {
  const Eigen::VectorXf content = codec.encode_content(image);
  const Eigen::VectorXd own = codec.encode_style(image);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(codec.style_dim());
  const double informed = image_mse(image, codec.decode(content, own));
  if (informed < kMinReconstructionError)
    throw DegenerateReconstruction("reconstruction error " + fmt_fixed(informed, 15) + " below 1e-12");
  const double biased = image_mse(image, codec.decode(content, ones));
  return biased / informed;
}

std::vector<double> iob_values(std::span<const Image> images, const StyleCodec& codec) {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(iob(im, codec));
  return out;
}

double mean_iob(std::span<const Image> images, const StyleCodec& codec) {
  if (images.empty()) throw DataError("mean IOB of an empty set");
  return mean_of(iob_values(images, codec));
}

void write_style_csv(const std::filesystem::path& path, std::span<const StyleVector> vectors) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  int d = vectors.empty() ? 0 : vectors[0].d();
  os << "id,encoder_id,d";
  for (int i = 1; i <= d; ++i) os << ",v" << i;
  os << "\n";
  for (const auto& v : vectors) {
    if (v.d() != d) throw DimensionMismatch("style vectors of mixed length in one file");
    os << v.image_id << ',' << v.encoder_id << ',' << d;
    for (int i = 0; i < d; ++i) os << ',' << fmt_sci(v.values[i], 16);
    os << "\n";
  }
}

std::vector<StyleVector> read_style_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::vector<StyleVector> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() < 3) throw ParseError("style CSV row with fewer than 3 columns");
    const int d = static_cast<int>(parse_double(cells[2]));
    if (static_cast<int>(cells.size()) != 3 + d) throw ParseError("style CSV row length does not match d");
    StyleVector v;
    v.image_id = cells[0];
    v.encoder_id = cells[1];
    v.values.resize(d);
    for (int i = 0; i < d; ++i) v.values[i] = parse_double(cells[3 + i]);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace realism::styledist
