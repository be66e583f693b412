#include <random>

#include "doctest.h"
#include "realism/edgefeat.hpp"
#include "realism/error.hpp"
#include "realism/fixtures.hpp"
#include "realism/fusionnet/train.hpp"
#include "realism/nn/checkpoint.hpp"
#include "test_util.hpp"

using namespace realism;

namespace {

std::vector<PlaneSize> halving(Index h, Index w, int levels) {
  std::vector<PlaneSize> s;
  for (int k = 0; k < levels; ++k) s.push_back({h >> k, w >> k});
  return s;
}

Image step_image(Index h, Index w, Index col) {
  Image im(h, w);
  for (int k = 0; k < 3; ++k) im.channel[k].rightCols(w - col).setOnes();
  return im;
}

/// HED-shaped checkpoint with narrow stages and random weights.
std::filesystem::path tiny_hed(const std::filesystem::path& dir, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0, 0.3);
  auto random = [&](Shape s) {
    Tensor<double> t(s);
    for (Index i = 0; i < t.size(); ++i) t.data[i] = nd(rng);
    return t;
  };
  nn::CheckpointFile f;
  f.header_json = R"({"scalar":"float32","kind":"hed"})";
  Index in = 3;
  for (int s = 0; s < 5; ++s) {
    const Index out = 2 + s;
    for (int j = 0; j < HedEdgeBackend::kStageConvs[s]; ++j) {
      const std::string base = "stage" + std::to_string(s + 1) + ".conv" + std::to_string(j + 1);
      f.blocks.push_back({base + ".weight", random({out, in, 3, 3})});
      f.blocks.push_back({base + ".bias", random({out, 1, 1, 1})});
      in = out;
    }
    const std::string side = "side" + std::to_string(s + 1);
    f.blocks.push_back({side + ".weight", random({1, in, 1, 1})});
    f.blocks.push_back({side + ".bias", random({1, 1, 1, 1})});
  }
  auto path = dir / "hed.ckpt";
  nn::write_checkpoint(path, f);
  return path;
}

}  // namespace

TEST_CASE("constant image has no edges") {
  Image im(32, 32);
  for (auto& c : im.channel) c.setConstant(0.4f);
  FixedEdgeBackend b;
  auto p = edge_pyramid(im, b, halving(32, 32, 5));
  REQUIRE(p.levels() == 5);
  for (const auto& m : p.maps) CHECK((m[0] == 0.0f).all());
}

TEST_CASE("step edge peaks at the step on every level") {
  const Index col = 24;
  FixedEdgeBackend b;
  auto sizes = halving(64, 64, 5);
  auto p = edge_pyramid(step_image(64, 64, col), b, sizes);
  for (std::size_t k = 0; k < p.levels(); ++k) {
    const Plane& m = p.maps[k][0];
    Index r, c;
    m.maxCoeff(&r, &c);
    // boundary between pixel col-1 and col, mapped to the level's pixel grid
    const double where = static_cast<double>(col) / (1 << k) - 0.5;
    CHECK(std::abs(c - where) <= 1.0);
    CHECK(m.maxCoeff() <= 1.0f);
    CHECK(m.minCoeff() >= 0.0f);
  }
  CHECK(p.maps[0][0].maxCoeff() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("sobel response bounds") {
  Plane checker(8, 8);
  for (Index r = 0; r < 8; ++r)
    for (Index c = 0; c < 8; ++c) checker(r, c) = (r + c) % 2;
  auto m = sobel_magnitude(checker);
  CHECK(m.maxCoeff() <= 1.0f);
  CHECK(m.minCoeff() >= 0.0f);
  CHECK(m.allFinite());
}

TEST_CASE("default model pyramid sizes") {
  auto spec = fusionnet::ModelSpec::paper_default();
  auto in = spec.stage_input_sizes();
  std::vector<PlaneSize> sizes(in.begin(), in.end());
  const Index expect[5] = {400, 200, 100, 50, 25};
  for (int k = 0; k < 5; ++k) {
    CHECK(sizes[k].height == expect[k]);
    CHECK(sizes[k].width == expect[k]);
  }
  auto scene = fixtures::sky_scene(400, 400, 4);
  FixedEdgeBackend b;
  auto p = edge_pyramid(scene.image, b, sizes);
  for (int k = 0; k < 5; ++k) {
    CHECK(p.maps[k][0].rows() == expect[k]);
    CHECK(p.maps[k][0].cols() == expect[k]);
    CHECK(p.maps[k][0].allFinite());
  }
}

TEST_CASE("fixed backend is deterministic and translation-equivariant on the interior") {
  auto wide = fixtures::sky_scene(64, 112, 8).image;
  const Index shift = 16;
  Image a(64, 64), bimg(64, 64);
  for (int k = 0; k < 3; ++k) {
    a.channel[k] = wide.channel[k].leftCols(64);
    bimg.channel[k] = wide.channel[k].middleCols(shift, 64);
  }
  FixedEdgeBackend b;
  auto sizes = halving(64, 64, 5);
  auto pa = edge_pyramid(a, b, sizes), pb = edge_pyramid(bimg, b, sizes);
  auto again = edge_pyramid(a, b, sizes);
  for (std::size_t k = 0; k < 5; ++k) CHECK((pa.maps[k][0] == again.maps[k][0]).all());
  for (std::size_t k = 0; k < 4; ++k) {
    const Index s = shift >> k, n = 64 >> k;
    const Index inner = n - s - 2;
    if (inner <= 1) continue;
    Plane left = pa.maps[k][0].block(1, s + 1, n - 2, inner - 1);
    Plane right = pb.maps[k][0].block(1, 1, n - 2, inner - 1);
    CHECK((left - right).abs().maxCoeff() < 1e-6f);
  }
}

TEST_CASE("edge level tensor packing") {
  FixedEdgeBackend b;
  auto sizes = halving(16, 16, 3);
  std::vector<EdgePyramid> ps{edge_pyramid(fixtures::sky_scene(16, 16, 1).image, b, sizes),
                              edge_pyramid(fixtures::sky_scene(16, 16, 2).image, b, sizes)};
  auto t = edge_level_tensor<float>(ps, 1);
  CHECK(t.shape == Shape{2, 1, 8, 8});
  CHECK(t.at(1, 0, 3, 5) == ps[1].maps[1][0](3, 5));
}

TEST_CASE("hed backend") {
  CHECK_THROWS_AS(make_edge_backend("hed", "/nonexistent/hed.ckpt"), BackendUnavailable);
  CHECK_THROWS_AS(make_edge_backend("hed"), BackendUnavailable);
  CHECK_THROWS_AS(make_edge_backend("sobelish"), InvalidArgument);

  auto dir = testing::scratch_dir("edgefeat_hed");
  {
    nn::CheckpointFile f;
    f.header_json = R"({"scalar":"float32"})";
    nn::write_checkpoint(dir / "empty.ckpt", f);
    CHECK_THROWS_AS(make_edge_backend("hed", dir / "empty.ckpt"), BackendUnavailable);
  }
  auto backend = make_edge_backend("hed", tiny_hed(dir, 3));
  auto sizes = halving(32, 32, 5);
  auto scene = fixtures::sky_scene(32, 32, 5).image;
  auto p = edge_pyramid(scene, *backend, sizes);
  REQUIRE(p.levels() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(p.maps[k][0].rows() == sizes[k].height);
    CHECK(p.maps[k][0].minCoeff() >= 0.0f);
    CHECK(p.maps[k][0].maxCoeff() <= 1.0f);
  }

  // training the classifier never touches the backend
  auto spec = fusionnet::ModelSpec::miniature(2);
  fusionnet::TrainConfig tc;
  tc.batch_size = 2;
  tc.learning_rate = 1e-2;
  fusionnet::Trainer<float> trainer(spec, backend, tc);
  std::mt19937_64 rng(1);
  std::vector<Image> imgs{fixtures::pattern_image(0, 32, rng), fixtures::pattern_image(1, 32, rng)};
  std::vector<fusionnet::Sample> samples{{&imgs[0], 0, 1}, {&imgs[1], 1, 2}};
  auto before = edge_pyramid(scene, *backend, sizes);
  for (int s = 0; s < 3; ++s) fusionnet::supervised_step(trainer, samples, s);
  auto after = edge_pyramid(scene, *backend, sizes);
  for (std::size_t k = 0; k < 5; ++k) CHECK((before.maps[k][0] == after.maps[k][0]).all());
}

TEST_CASE("fixed backend unchanged by classifier training") {
  auto backend = make_edge_backend("fixed");
  auto spec = fusionnet::ModelSpec::miniature(2);
  fusionnet::TrainConfig tc;
  tc.batch_size = 2;
  fusionnet::Trainer<float> trainer(spec, backend, tc);
  std::mt19937_64 rng(2);
  std::vector<Image> imgs{fixtures::pattern_image(0, 32, rng), fixtures::pattern_image(1, 32, rng)};
  std::vector<fusionnet::Sample> samples{{&imgs[0], 0, 1}, {&imgs[1], 1, 2}};
  auto sizes = halving(32, 32, 5);
  auto before = edge_pyramid(imgs[0], *backend, sizes);
  fusionnet::supervised_step(trainer, samples, 0);
  auto after = edge_pyramid(imgs[0], *backend, sizes);
  for (std::size_t k = 0; k < 5; ++k) CHECK((before.maps[k][0] == after.maps[k][0]).all());
}
