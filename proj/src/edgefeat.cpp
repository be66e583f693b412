#include "realism/edgefeat.hpp"

#include <cmath>

#include "json.hpp"
#include "realism/error.hpp"
#include "realism/nn/checkpoint.hpp"
#include "realism/nn/ops.hpp"

namespace realism {

Plane sobel_magnitude(const Plane& g) {
  const Index h = g.rows(), w = g.cols();
  Plane out(h, w);
  auto at = [&](Index r, Index c) {
    r = std::clamp<Index>(r, 0, h - 1);
    c = std::clamp<Index>(c, 0, w - 1);
    return g(r, c);
  };
  const float norm = 1.0f / (4.0f * std::sqrt(2.0f));
  for (Index c = 0; c < w; ++c) {
    for (Index r = 0; r < h; ++r) {
      const float gx = (at(r - 1, c + 1) + 2 * at(r, c + 1) + at(r + 1, c + 1)) -
                       (at(r - 1, c - 1) + 2 * at(r, c - 1) + at(r + 1, c - 1));
      const float gy = (at(r + 1, c - 1) + 2 * at(r + 1, c) + at(r + 1, c + 1)) -
                       (at(r - 1, c - 1) + 2 * at(r - 1, c) + at(r - 1, c + 1));
      out(r, c) = std::min(1.0f, std::sqrt(gx * gx + gy * gy) * norm);
    }
  }
  return out;
}

EdgePyramid FixedEdgeBackend::compute(const Image& image, std::span<const PlaneSize> sizes) const {
  if (image.empty()) throw ShapeMismatch("edge pyramid of an empty image");
  EdgePyramid p;
  p.backend_id = id();
  const Plane gray = image.gray();
  for (const auto& s : sizes) {
    if (s.height <= 0 || s.width <= 0) throw ShapeMismatch("edge pyramid level with non-positive size");
    Plane level = (s.height == gray.rows() && s.width == gray.cols()) ? gray : resize_area(gray, s.height, s.width);
    p.maps.push_back({sobel_magnitude(level)});
  }
  return p;
}

struct HedEdgeBackend::Weights {
  struct Conv {
    nn::Var<float> weight, bias;
  };
  std::vector<std::vector<Conv>> stages;
  std::vector<Conv> sides;
};

namespace {

nn::Var<float> frozen(const nn::CheckpointFile& f, const std::string& name) {
  const auto* t = f.find(name);
  if (!t) throw BackendUnavailable("hed checkpoint lacks block '" + name + "'");
  return nn::Var<float>(t->cast<float>(), false);
}

}  // namespace

HedEdgeBackend::HedEdgeBackend(const std::filesystem::path& checkpoint) : weights_(std::make_unique<Weights>()) {
  if (checkpoint.empty() || !std::filesystem::exists(checkpoint))
    throw BackendUnavailable("hed checkpoint not found: '" + checkpoint.string() + "'");
  nn::CheckpointFile f;
  try {
    f = nn::read_checkpoint(checkpoint);
  } catch (const Error& e) {
    throw BackendUnavailable(std::string("hed checkpoint unreadable: ") + e.what());
  }
  Index in_channels = 3;
  for (int s = 0; s < 5; ++s) {
    std::vector<Weights::Conv> convs;
    for (int j = 0; j < kStageConvs[s]; ++j) {
      const std::string base = "stage" + std::to_string(s + 1) + ".conv" + std::to_string(j + 1);
      Weights::Conv c{frozen(f, base + ".weight"), frozen(f, base + ".bias")};
      const Shape ws = c.weight.shape();
      if (ws.c != in_channels || ws.h != 3 || ws.w != 3 || c.bias.value().size() != ws.n)
        throw BackendUnavailable("hed block '" + base + "' has shape " + ws.str());
      in_channels = ws.n;
      convs.push_back(std::move(c));
    }
    const std::string side = "side" + std::to_string(s + 1);
    Weights::Conv sc{frozen(f, side + ".weight"), frozen(f, side + ".bias")};
    if (sc.weight.shape() != Shape{1, in_channels, 1, 1})
      throw BackendUnavailable("hed block '" + side + "' has shape " + sc.weight.shape().str());
    weights_->stages.push_back(std::move(convs));
    weights_->sides.push_back(std::move(sc));
  }
  id_ = "hed:" + checkpoint.filename().string();
}

HedEdgeBackend::~HedEdgeBackend() = default;

EdgePyramid HedEdgeBackend::compute(const Image& image, std::span<const PlaneSize> sizes) const {
  if (sizes.empty()) return EdgePyramid{{}, id_};
  if (sizes.size() > 5) throw ShapeMismatch("hed backend provides at most 5 side outputs");
  nn::NoGradGuard no_grad;
  const PlaneSize base = sizes[0];
  Image in = (image.height() == base.height && image.width() == base.width)
                 ? image
                 : resize_bilinear(image, base.height, base.width);
  nn::Var<float> x(to_tensor<float>(std::span<const Image>(&in, 1)));
  EdgePyramid p;
  p.backend_id = id_;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    if (s > 0) x = nn::max_pool2(x);
    for (const auto& c : weights_->stages[s]) x = nn::relu(nn::conv2d(x, c.weight, c.bias, 1, 1));
    auto side = nn::sigmoid(nn::conv2d(x, weights_->sides[s].weight, weights_->sides[s].bias, 1, 0));
    Plane plane = Eigen::Map<const Eigen::ArrayXXf>(side.value().data.data(), side.shape().w, side.shape().h).transpose();
    if (plane.rows() != sizes[s].height || plane.cols() != sizes[s].width)
      plane = resize_bilinear(plane, sizes[s].height, sizes[s].width).cwiseMax(0.0f).cwiseMin(1.0f);
    p.maps.push_back({std::move(plane)});
  }
  return p;
}

std::shared_ptr<const EdgeBackend> make_edge_backend(const std::string& kind, const std::filesystem::path& checkpoint) {
  if (kind == "fixed") return std::make_shared<FixedEdgeBackend>();
  if (kind == "hed") return std::make_shared<HedEdgeBackend>(checkpoint);
  throw InvalidArgument("unknown edge backend '" + kind + "' (expected fixed or hed)");
}

EdgePyramid edge_pyramid(const Image& image, const EdgeBackend& backend, std::span<const PlaneSize> sizes) {
  return backend.compute(image, sizes);
}

template <typename Scalar>
Tensor<Scalar> edge_level_tensor(std::span<const EdgePyramid> pyramids, std::size_t level) {
  if (pyramids.empty()) throw ShapeMismatch("no edge pyramids");
  const auto& first = pyramids[0].maps.at(level);
  const Index ch = static_cast<Index>(first.size()), h = first[0].rows(), w = first[0].cols();
  Tensor<Scalar> t(Shape{static_cast<Index>(pyramids.size()), ch, h, w});
  for (std::size_t n = 0; n < pyramids.size(); ++n) {
    const auto& maps = pyramids[n].maps.at(level);
    if (static_cast<Index>(maps.size()) != ch) throw ShapeMismatch("edge channel count differs across batch");
    for (Index c = 0; c < ch; ++c) {
      if (maps[c].rows() != h || maps[c].cols() != w) throw ShapeMismatch("edge map size differs across batch");
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dst(
          t.data.data() + (static_cast<Index>(n) * ch + c) * h * w, h, w);
      dst = maps[c].matrix().template cast<Scalar>();
    }
  }
  return t;
}

template Tensor<float> edge_level_tensor<float>(std::span<const EdgePyramid>, std::size_t);
template Tensor<double> edge_level_tensor<double>(std::span<const EdgePyramid>, std::size_t);

}  // namespace realism
