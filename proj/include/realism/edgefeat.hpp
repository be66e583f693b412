#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "realism/image.hpp"

namespace realism {

/// Edge maps for one image, one entry per fusion site. maps[k][ch] is a
/// (height, width) grid with values in [0, 1].
struct EdgePyramid {
  std::vector<std::vector<Plane>> maps;
  std::string backend_id;

  std::size_t levels() const { return maps.size(); }
};

struct PlaneSize {
  Index height = 0, width = 0;
  bool operator==(const PlaneSize&) const = default;
};

class EdgeBackend {
 public:
  virtual ~EdgeBackend() = default;
  virtual std::string id() const = 0;
  /// Channels per map; part of the model's shape contract.
  virtual int channels() const = 0;
  /// One map per requested size, in order.
  virtual EdgePyramid compute(const Image& image, std::span<const PlaneSize> sizes) const = 0;
};

/// Sobel gradient magnitude of the luma, computed at each pyramid level after
/// area resampling; no learned parameters.
class FixedEdgeBackend final : public EdgeBackend {
 public:
  std::string id() const override { return "fixed"; }
  int channels() const override { return 1; }
  EdgePyramid compute(const Image& image, std::span<const PlaneSize> sizes) const override;
};

/// Gradient magnitude with replicate padding, scaled so a unit step gives 1/sqrt(2)
/// and the maximum possible response is 1.
Plane sobel_magnitude(const Plane& gray);

/// Holistically-nested edge network: five VGG-style stages with a 1x1
/// side-output per stage, post-sigmoid. Weights are loaded from a checkpoint
/// and never change afterwards.
class HedEdgeBackend final : public EdgeBackend {
 public:
  explicit HedEdgeBackend(const std::filesystem::path& checkpoint);
  ~HedEdgeBackend() override;

  std::string id() const override { return id_; }
  int channels() const override { return 1; }
  EdgePyramid compute(const Image& image, std::span<const PlaneSize> sizes) const override;

  /// Convolutions per stage in the VGG-16 layout.
  static constexpr int kStageConvs[5] = {2, 2, 3, 3, 3};

 private:
  struct Weights;
  std::unique_ptr<Weights> weights_;
  std::string id_;
};

/// kind ∈ {"fixed", "hed"}; hed requires a checkpoint path.
std::shared_ptr<const EdgeBackend> make_edge_backend(const std::string& kind,
                                                     const std::filesystem::path& checkpoint = {});

EdgePyramid edge_pyramid(const Image& image, const EdgeBackend& backend, std::span<const PlaneSize> sizes);

/// Packs level k of several pyramids into an (N, channels, H, W) tensor.
template <typename Scalar>
Tensor<Scalar> edge_level_tensor(std::span<const EdgePyramid> pyramids, std::size_t level);

}  // namespace realism
