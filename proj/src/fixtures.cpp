#include "realism/fixtures.hpp"

#include <cmath>
#include <numbers>

#include "realism/error.hpp"

namespace realism::fixtures {

Plane value_noise(Index height, Index width, Index cells_y, Index cells_x, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Plane lattice(std::max<Index>(2, cells_y), std::max<Index>(2, cells_x));
  for (Index i = 0; i < lattice.size(); ++i) lattice.data()[i] = u(rng);
  return resize_bilinear(lattice, height, width);
}

namespace {

constexpr double kPi = std::numbers::pi;

struct Blob {
  double r, c, sr, sc, weight;
};

Plane blobs(Index h, Index w, const std::vector<Blob>& list) {
  Plane p = Plane::Zero(h, w);
  for (const auto& b : list) {
    const Index r0 = std::max<Index>(0, static_cast<Index>(b.r - 3 * b.sr));
    const Index r1 = std::min<Index>(h - 1, static_cast<Index>(b.r + 3 * b.sr));
    const Index c0 = std::max<Index>(0, static_cast<Index>(b.c - 3 * b.sc));
    const Index c1 = std::min<Index>(w - 1, static_cast<Index>(b.c + 3 * b.sc));
    for (Index c = c0; c <= c1; ++c)
      for (Index r = r0; r <= r1; ++r) {
        const double dy = (r - b.r) / b.sr, dx = (c - b.c) / b.sc;
        p(r, c) += static_cast<float>(b.weight * std::exp(-0.5 * (dx * dx + dy * dy)));
      }
  }
  return p.cwiseMin(1.0f);
}

std::vector<Blob> scatter(std::mt19937_64& rng, int count, double r_lo, double r_hi, double w, double size_lo,
                          double size_hi, double aspect, double weight) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Blob> out;
  for (int i = 0; i < count; ++i) {
    const double s = size_lo + (size_hi - size_lo) * u(rng);
    out.push_back({r_lo + (r_hi - r_lo) * u(rng), w * u(rng), s, s * aspect, weight});
  }
  return out;
}

}  // namespace

Plane cloud_layer(CloudLabel genus, Index h, Index w, std::mt19937_64& rng) {
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (genus) {
    case CloudLabel::cirrus: {
      // Thin wispy diagonal streaks high in the sky.
      Plane p = Plane::Zero(h, w);
      const int n = 5 + static_cast<int>(u(rng) * 4);
      for (int k = 0; k < n; ++k) {
        const double r0 = H * (0.05 + 0.3 * u(rng)), c0 = W * u(rng), slope = 0.2 + 0.3 * u(rng);
        const double len = W * (0.2 + 0.3 * u(rng));
        for (Index c = 0; c < w; ++c)
          for (Index r = 0; r < h; ++r) {
            const double t = c - c0;
            if (t < 0 || t > len) continue;
            const double d = std::abs(r - (r0 + slope * t));
            p(r, c) = std::max(p(r, c), static_cast<float>(0.8 * std::exp(-d * d / (0.0004 * H * H + 1.0))));
          }
      }
      return p;
    }
    case CloudLabel::cirrostratus:
      return (0.35f + 0.1f * value_noise(h, w, 3, 3, rng)).cwiseMin(1.0f);
    case CloudLabel::cirrocumulus:
      return blobs(h, w, scatter(rng, 60, 0.03 * H, 0.3 * H, W, 0.012 * H, 0.02 * H, 1.0, 0.7));
    case CloudLabel::altocumulus:
      return blobs(h, w, scatter(rng, 25, 0.1 * H, 0.35 * H, W, 0.03 * H, 0.05 * H, 1.4, 0.8));
    case CloudLabel::altostratus:
      return (0.6f + 0.15f * value_noise(h, w, 2, 4, rng)).cwiseMin(1.0f);
    case CloudLabel::cumulus:
      return blobs(h, w, scatter(rng, 4, 0.2 * H, 0.35 * H, W, 0.06 * H, 0.1 * H, 1.3, 1.0));
    case CloudLabel::cumulonimbus: {
      auto list = scatter(rng, 1, 0.15 * H, 0.2 * H, W, 0.12 * H, 0.14 * H, 1.0, 1.0);
      list[0].c = W * (0.3 + 0.4 * u(rng));
      for (int k = 0; k < 5; ++k) list.push_back({list[0].r + 0.05 * H * k, list[0].c, 0.09 * H, 0.14 * H, 1.0});
      list.push_back({0.08 * H, list[0].c, 0.05 * H, 0.35 * H, 1.0});  // anvil
      return blobs(h, w, list);
    }
    case CloudLabel::nimbostratus:
      return (0.85f + 0.15f * value_noise(h, w, 3, 3, rng)).cwiseMin(1.0f);
    case CloudLabel::stratocumulus: {
      Plane base = blobs(h, w, scatter(rng, 18, 0.15 * H, 0.4 * H, W, 0.05 * H, 0.07 * H, 1.8, 0.9));
      return (base + 0.3f * value_noise(h, w, 4, 6, rng)).cwiseMin(1.0f);
    }
    case CloudLabel::stratus: {
      Plane p(h, w);
      for (Index r = 0; r < h; ++r) p.row(r).setConstant(static_cast<float>(0.7 * std::min(1.0, (r + 1) / (0.3 * H))));
      return p;
    }
  }
  return Plane::Zero(h, w);
}

SkyScene sky_scene(Index h, Index w, std::uint64_t seed, const SceneOptions& opt) {
  if (h < 4 || w < 4) throw InvalidArgument("sky scene needs at least 4x4 pixels");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SkyScene s{Image(h, w), MaskGrid::Zero(h, w)};

  const double horizon = opt.horizon_lo + (opt.horizon_hi - opt.horizon_lo) * u(rng);
  const double amp = opt.horizon_wave * h * u(rng), period = w * (0.5 + u(rng)), phase = 2 * kPi * u(rng);
  const float top[3] = {static_cast<float>(0.20 + 0.1 * u(rng)), static_cast<float>(0.40 + 0.1 * u(rng)),
                        static_cast<float>(0.80 + 0.1 * u(rng))};
  const float low[3] = {0.70f, 0.80f, 0.95f};
  const float ground[3] = {static_cast<float>(0.22 + 0.1 * u(rng)), static_cast<float>(0.30 + 0.1 * u(rng)),
                           static_cast<float>(0.10 + 0.05 * u(rng))};
  const Plane coarse = value_noise(h, w, 6, 8, rng);
  std::uniform_real_distribution<float> grain(-0.12f, 0.12f);

  Plane cloud = opt.clouds ? cloud_layer(*opt.clouds, h, w, rng) : Plane::Zero(h, w);
  const float cloud_gray = (opt.clouds == CloudLabel::nimbostratus || opt.clouds == CloudLabel::cumulonimbus) ? 0.55f
                                                                                                                : 0.95f;
  for (Index c = 0; c < w; ++c) {
    const double line = h * horizon + amp * std::sin(2 * kPi * c / period + phase);
    for (Index r = 0; r < h; ++r) {
      if (r < line) {
        const float t = static_cast<float>(std::clamp(r / std::max(1.0, line), 0.0, 1.0));
        const float a = cloud(r, c);
        for (int k = 0; k < 3; ++k) s.image.channel[k](r, c) = ((1 - t) * top[k] + t * low[k]) * (1 - a) + cloud_gray * a;
        s.sky(r, c) = 1;
      } else {
        const float tex = 0.7f + 0.5f * coarse(r, c) + grain(rng);
        for (int k = 0; k < 3; ++k) s.image.channel[k](r, c) = std::clamp(ground[k] * tex, 0.0f, 1.0f);
      }
    }
  }
  return s;
}

Image paint(const Image& photo, const ArtistStyle& style, std::mt19937_64& rng) {
  const Index h = photo.height(), w = photo.width();
  Image out = photo;
  // Elongated strokes: horizontal noise at fine vertical and coarse horizontal frequency.
  const Plane strokes = value_noise(h, w, std::max<Index>(2, h / 3), std::max<Index>(2, w / 12), rng);
  for (int k = 0; k < 3; ++k) {
    Plane& c = out.channel[k];
    const float mean = c.mean();
    c = (c - mean) * style.contrast + mean;
    c = c * style.tint[k] + style.stroke_noise * (strokes - 0.5f);
    c = c.cwiseMax(0.0f).cwiseMin(1.0f);
    if (style.posterize_levels > 1) {
      const float l = static_cast<float>(style.posterize_levels - 1);
      c = (c * l).round() / l;
    }
  }
  return out;
}

std::vector<ArtistStyle> default_artists(int count) {
  const std::vector<ArtistStyle> pool{
      {"artist_a", {1.05f, 1.0f, 0.92f}, 1.1f, 0.08f, 0},
      {"artist_b", {1.15f, 0.95f, 0.75f}, 0.8f, 0.2f, 8},
      {"artist_c", {0.9f, 1.0f, 1.1f}, 1.2f, 0.12f, 0},
      {"artist_d", {1.0f, 0.9f, 0.85f}, 0.9f, 0.25f, 6},
  };
  if (count < 1 || count > static_cast<int>(pool.size())) throw InvalidArgument("artist count must be in [1, 4]");
  return {pool.begin(), pool.begin() + count};
}

Image pattern_image(int cls, Index size, std::mt19937_64& rng, double noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, noise);
  const double period = size / (3.0 + 3.0 * u(rng)), phase = 2 * kPi * u(rng);
  const double base = 0.3 + 0.3 * u(rng);
  const float tint[3] = {static_cast<float>(0.8 + 0.4 * u(rng)), static_cast<float>(0.8 + 0.4 * u(rng)),
                         static_cast<float>(0.8 + 0.4 * u(rng))};
  Image im(size, size);
  for (Index c = 0; c < size; ++c)
    for (Index r = 0; r < size; ++r) {
      const double coord = cls == 0 ? r : cls == 1 ? c : (r + c) / std::numbers::sqrt2;
      const double v = base + 0.3 * std::sin(2 * kPi * coord / period + phase) + n(rng);
      for (int k = 0; k < 3; ++k) im.channel[k](r, c) = std::clamp(static_cast<float>(v) * tint[k], 0.0f, 1.0f);
    }
  return im;
}

CorpusPaths write_corpus(const std::filesystem::path& dir, const CorpusOptions& o) {
  if (o.genera.empty()) throw InvalidArgument("fixture needs at least one genus");
  if (o.photo_train + o.photo_test > o.photos) throw InvalidArgument("photo split counts exceed photo count");
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  Manifest m;
  std::mt19937_64 rng(o.seed);
  auto next_seed = [&] { return rng(); };
  int label_cursor = 0;
  const auto artists = default_artists(o.artists);
  auto write = [&](const std::string& id, const Image& im, const MaskGrid& mask) {
    save_image(im, dir / "images" / (id + ".png"));
    save_mask(mask, dir / "masks" / (id + ".png"));
  };
  for (const auto& artist : artists) {
    for (int i = 0; i < o.paintings_per_artist; ++i) {
      const CloudLabel g = o.genera[label_cursor++ % o.genera.size()];
      SceneOptions so;
      so.clouds = g;
      auto scene = sky_scene(o.height, o.width, next_seed(), so);
      std::mt19937_64 prng(next_seed());
      const std::string id = artist.name + "_" + std::to_string(i + 1);
      write(id, paint(scene.image, artist, prng), scene.sky);
      CorpusRecord r;
      r.id = id;
      r.image_path = fs::path("images") / (id + ".png");
      r.source = Source::painting;
      r.artist = artist.name;
      r.year = 1800 + 5 * i;
      r.label10 = g;
      r.label5 = map_to_form(g);
      r.split = Split::test;
      r.annotator = "fixture";
      m.records.push_back(r);
    }
  }
  for (int i = 0; i < o.photos; ++i) {
    const CloudLabel g = o.genera[label_cursor++ % o.genera.size()];
    SceneOptions so;
    so.clouds = g;
    auto scene = sky_scene(o.height, o.width, next_seed(), so);
    const std::string id = "photo_" + std::to_string(i + 1);
    write(id, scene.image, scene.sky);
    CorpusRecord r;
    r.id = id;
    r.image_path = fs::path("images") / (id + ".png");
    r.source = Source::photo;
    r.split = i < o.photo_train ? Split::train : i < o.photo_train + o.photo_test ? Split::test : Split::unlabeled;
    if (r.split != Split::unlabeled) {
      r.label10 = g;
      r.label5 = map_to_form(g);
    }
    m.records.push_back(r);
  }
  save_manifest(m, dir / "manifest.jsonl");
  return {dir / "manifest.jsonl", dir / "masks"};
}

SkyClassifier default_sky_classifier(int count, Index size, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("default sky classifier needs at least one scene");
  std::vector<Image> images;
  std::vector<MaskGrid> masks;
  const std::array<CloudLabel, 4> genera{CloudLabel::cumulus, CloudLabel::cirrus, CloudLabel::stratus,
                                         CloudLabel::cumulonimbus};
  for (int i = 0; i < count; ++i) {
    SceneOptions so;
    if (i % 2 == 1) so.clouds = genera[(i / 2) % genera.size()];
    auto scene = sky_scene(size, size, seed + 977 * i, so);
    images.push_back(std::move(scene.image));
    masks.push_back(std::move(scene.sky));
  }
  return fit_sky_classifier(images, masks);
}

}  // namespace realism::fixtures
