#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "realism/corpus.hpp"
#include "realism/image.hpp"
#include "realism/skyseg.hpp"

namespace realism::fixtures {

struct SkyScene {
  Image image;
  MaskGrid sky;  // 1 = sky
};

struct SceneOptions {
  /// Horizon row as a fraction of height, drawn uniformly from [lo, hi].
  double horizon_lo = 0.4, horizon_hi = 0.6;
  /// Peak horizon undulation as a fraction of height.
  double horizon_wave = 0.03;
  /// Cloud genus painted into the sky; none gives a clear gradient sky.
  std::optional<CloudLabel> clouds;
};

/// Smooth vertical-gradient sky over a textured ground with a wavy horizon.
SkyScene sky_scene(Index height, Index width, std::uint64_t seed, const SceneOptions& options = {});

/// Cloud opacity field in [0, 1] with a genus-specific texture.
Plane cloud_layer(CloudLabel genus, Index height, Index width, std::mt19937_64& rng);

/// Smooth random field in [0, 1] from bilinearly upsampled lattice noise.
Plane value_noise(Index height, Index width, Index cells_y, Index cells_x, std::mt19937_64& rng);

struct ArtistStyle {
  std::string name;
  std::array<float, 3> tint{1.0f, 1.0f, 1.0f};
  float contrast = 1.0f;
  float stroke_noise = 0.0f;  // amplitude of elongated brush-stroke texture
  int posterize_levels = 0;   // 0 keeps full tone range
};

/// Painterly rendering of a scene: tint, contrast, stroke texture, posterization.
Image paint(const Image& photo, const ArtistStyle& style, std::mt19937_64& rng);

std::vector<ArtistStyle> default_artists(int count);

/// Two-class texture images: class 0 horizontal stripes, 1 vertical, 2 diagonal.
Image pattern_image(int cls, Index size, std::mt19937_64& rng, double noise = 0.15);

struct CorpusOptions {
  int artists = 2;
  int paintings_per_artist = 12;
  int photos = 30;
  Index height = 96, width = 96;
  /// Photo split counts; the remainder are unlabeled.
  int photo_train = 18, photo_test = 4;
  /// Genera cycled through when assigning labels.
  std::vector<CloudLabel> genera{CloudLabel::cumulus, CloudLabel::cumulonimbus, CloudLabel::cirrus,
                                 CloudLabel::stratus, CloudLabel::stratocumulus};
  std::uint64_t seed = 7;
};

struct CorpusPaths {
  std::filesystem::path manifest;
  std::filesystem::path masks_dir;
};

/// Writes images, ground-truth sky masks (masks/<id>.png) and manifest.jsonl under dir.
/// Every painting is in the test split.
CorpusPaths write_corpus(const std::filesystem::path& dir, const CorpusOptions& options = {});

/// Sky classifier fitted on `count` generated scenes (half with clouds), used
/// when no trained model is supplied.
SkyClassifier default_sky_classifier(int count = 12, Index size = 96, std::uint64_t seed = 11);

}  // namespace realism::fixtures
