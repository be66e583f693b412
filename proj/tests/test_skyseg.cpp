#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "realism/error.hpp"
#include "realism/fixtures.hpp"
#include "realism/skyseg.hpp"

using namespace realism;

namespace {

Image filled(Index h, Index w, float r, float g, float b) {
  Image im(h, w);
  im.channel[0].setConstant(r);
  im.channel[1].setConstant(g);
  im.channel[2].setConstant(b);
  return im;
}

/// Greedy Ward agglomeration recomputed from raw pixels: regions are sets of
/// seed blocks named by their smallest block index; each step scans every
/// adjacent pair.
struct OracleResult {
  std::vector<int> block_region;  // per seed block
  std::vector<std::pair<int, int>> merges;
};

OracleResult oracle_agglomerate(const Image& im, int block, int target) {
  const Index by = im.height() / block, bx = im.width() / block;
  const int n = static_cast<int>(by * bx);
  std::vector<int> region(n);
  for (int i = 0; i < n; ++i) region[i] = i;
  auto pixels_of = [&](const std::set<int>& blocks) {
    std::vector<Eigen::Vector3d> px;
    for (int b : blocks)
      for (int r = 0; r < block; ++r)
        for (int c = 0; c < block; ++c) {
          Index y = (b / bx) * block + r, x = (b % bx) * block + c;
          px.emplace_back(im.channel[0](y, x), im.channel[1](y, x), im.channel[2](y, x));
        }
    return px;
  };
  auto sse = [&](const std::set<int>& blocks) {
    auto px = pixels_of(blocks);
    Eigen::Vector3d m = Eigen::Vector3d::Zero();
    for (auto& p : px) m += p;
    m /= px.size();
    double s = 0;
    for (auto& p : px) s += (p - m).squaredNorm();
    return s;
  };
  auto adjacent_blocks = [&](int a, int b) {
    int ya = a / bx, xa = a % bx, yb = b / bx, xb = b % bx;
    return std::abs(ya - yb) + std::abs(xa - xb) == 1;
  };
  OracleResult res;
  int regions = n;
  while (regions > target) {
    std::map<int, std::set<int>> members;
    for (int i = 0; i < n; ++i) members[region[i]].insert(i);
    double best = 1e300;
    std::pair<int, int> pick{-1, -1};
    for (auto& [ra, sa] : members)
      for (auto& [rb, sb] : members) {
        if (ra >= rb) continue;
        bool adj = false;
        for (int a : sa)
          for (int b : sb) adj = adj || adjacent_blocks(a, b);
        if (!adj) continue;
        std::set<int> u = sa;
        u.insert(sb.begin(), sb.end());
        const double cost = sse(u) - sse(sa) - sse(sb);
        if (cost < best - 1e-12) {
          best = cost;
          pick = {ra, rb};
        }
      }
    for (auto& r : region)
      if (r == pick.second) r = pick.first;
    res.merges.push_back(pick);
    --regions;
  }
  res.block_region = region;
  return res;
}

/// Same partition up to label names.
bool same_partition(const Eigen::ArrayXXi& labels, const std::vector<int>& block_region, int block) {
  std::map<int, int> fwd, back;
  const Index bx = labels.cols() / block;
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c) {
      int o = block_region[(r / block) * bx + c / block], l = labels(r, c);
      if (fwd.count(o) && fwd[o] != l) return false;
      if (back.count(l) && back[l] != o) return false;
      fwd[o] = l;
      back[l] = o;
    }
  return true;
}

}  // namespace

TEST_CASE("two uniform halves give the halves") {
  Image im(16, 16);
  for (Index r = 0; r < 16; ++r)
    for (Index c = 0; c < 16; ++c) c < 8 ? im.set(r, c, 0, 0, 1) : im.set(r, c, 0, 1, 0);
  auto seg = a3c_cluster(im, 2);
  CHECK(seg.n_segments == 2);
  CHECK((seg.labels.leftCols(8) == seg.labels(0, 0)).all());
  CHECK((seg.labels.rightCols(8) == seg.labels(0, 15)).all());
  CHECK(seg.labels(0, 0) != seg.labels(0, 15));
}

TEST_CASE("uniform image still splits into two connected parts") {
  auto im = filled(16, 16, 0.3f, 0.3f, 0.3f);
  std::vector<MergeStep> log;
  auto seg = a3c_cluster(im, 2, {}, &log);
  CHECK(seg.n_segments == 2);
  CHECK_NOTHROW(check_segment_map(seg));
  for (const auto& m : log) CHECK(m.cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("target out of range") {
  auto im = filled(4, 4, 0, 0, 0);
  CHECK_THROWS_AS(a3c_cluster(im, 1), InvalidArgument);
  CHECK_THROWS_AS(a3c_cluster(im, 17), InvalidArgument);
  CHECK_THROWS_AS(a3c_cluster(Image{}, 2), InvalidArgument);
}

TEST_CASE("blue/green/blue bands: connectivity blocks the blue-blue merge") {
  Image im(6, 6);
  for (Index r = 0; r < 6; ++r)
    for (Index c = 0; c < 6; ++c) (r >= 2 && r < 4) ? im.set(r, c, 0, 0.8f, 0) : im.set(r, c, 0, 0, 0.9f);
  std::vector<MergeStep> log;
  auto seg = a3c_cluster(im, 2, A3CConfig{2}, &log);
  auto oracle = oracle_agglomerate(im, 2, 2);
  CHECK(same_partition(seg.labels, oracle.block_region, 2));
  // the two blue bands are never one label without the green band between them
  CHECK(seg.labels(0, 0) != seg.labels(5, 0));
  const bool green_with_top = seg.labels(2, 0) == seg.labels(0, 0);
  const bool green_with_bottom = seg.labels(2, 0) == seg.labels(5, 0);
  CHECK(green_with_top != green_with_bottom);
  for (const auto& m : log) CHECK(m.adjacent);
}

TEST_CASE("a3c matches the brute-force oracle on random 6x6 images") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<float> u(0, 1);
  for (int trial = 0; trial < 25; ++trial) {
    Image im(6, 6);
    for (Index r = 0; r < 6; ++r)
      for (Index c = 0; c < 6; ++c) im.set(r, c, u(rng), u(rng), u(rng));
    const int target = 2 + trial % 6;
    std::vector<MergeStep> log;
    auto seg = a3c_cluster(im, target, A3CConfig{2}, &log);
    auto oracle = oracle_agglomerate(im, 2, target);
    CHECK(same_partition(seg.labels, oracle.block_region, 2));
    REQUIRE(log.size() == oracle.merges.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
      CHECK(log[i].kept == oracle.merges[i].first);
      CHECK(log[i].absorbed == oracle.merges[i].second);
    }
  }
}

TEST_CASE("merge log: adjacency and non-decreasing objective") {
  auto scene = fixtures::sky_scene(64, 80, 3);
  std::vector<MergeStep> log;
  auto seg = a3c_cluster(scene.image, 12, {}, &log);
  CHECK_NOTHROW(check_segment_map(seg));
  CHECK(seg.n_segments == 12);
  double prev = -1;
  for (const auto& m : log) {
    CHECK(m.adjacent);
    CHECK(m.cost >= -1e-12);
    CHECK(m.total_variance >= prev - 1e-9);
    prev = m.total_variance;
  }
  CHECK(within_segment_sse(scene.image, seg) == doctest::Approx(log.back().total_variance).epsilon(1e-6));
}

TEST_CASE("segment features") {
  auto im = filled(8, 10, 0.5f, 0.5f, 0.5f);
  SegmentMap one;
  one.labels = Eigen::ArrayXXi::Zero(8, 10);
  one.n_segments = 1;
  auto f = segment_features(im, one);
  REQUIRE(f.size() == 1);
  for (int k = 0; k < 3; ++k) {
    CHECK(f[0][k] == doctest::Approx(0.5));
    CHECK(f[0][3 + k] == doctest::Approx(0.0));
  }
  CHECK(f[0][6] == doctest::Approx(0.5));
  CHECK(f[0][7] == doctest::Approx(0.5));
  CHECK(f[0][8] == 0.0);
  CHECK(f[0][9] == 1.0);

  auto small = filled(2, 2, 0.1f, 0.2f, 0.3f);
  SegmentMap rows;
  rows.labels.resize(2, 2);
  rows.labels << 0, 0, 1, 1;
  rows.n_segments = 2;
  auto g = segment_features(small, rows);
  CHECK(g[0][6] == doctest::Approx(0.25));
  CHECK(g[0][9] == doctest::Approx(0.5));
  CHECK(g[1][8] == doctest::Approx(0.5));

  auto scene = fixtures::sky_scene(40, 40, 9);
  auto seg = a3c_cluster(scene.image, 10);
  double area = 0;
  for (const auto& v : segment_features(scene.image, seg)) area += v[9];
  CHECK(area == doctest::Approx(1.0).epsilon(1e-9));

  SegmentMap wrong;
  wrong.labels = Eigen::ArrayXXi::Zero(3, 3);
  wrong.n_segments = 1;
  CHECK_THROWS_AS(segment_features(scene.image, wrong), ShapeMismatch);
}

TEST_CASE("sky classifier fitting") {
  std::vector<LabeledSegment> data;
  for (int i = 0; i < 20; ++i) {
    LabeledSegment s;
    s.features.setZero();
    const bool sky = i % 2 == 0;
    s.features.head<3>().setConstant(sky ? 0.8 + 0.01 * i : 0.2 - 0.005 * i);
    s.features[6] = sky ? 0.2 : 0.8;
    s.features[9] = 0.05;
    s.sky = sky;
    data.push_back(s);
  }
  auto clf = SkyClassifier::fit(data);
  for (const auto& s : data) CHECK(clf.is_sky(s.features) == s.sky);

  std::vector<LabeledSegment> one_class(data.begin(), data.begin() + 1);
  CHECK_THROWS_AS(SkyClassifier::fit(one_class), DegenerateData);

  // data drawn from a known logistic model; the fit must agree with it on held-out points
  SegmentFeatures w_true;
  w_true << 3, -2, 1, 0.5, 0, -1, 2, -3, 1, 0.5;
  w_true *= 3.0;
  const double b_true = 0.2;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 1);
  std::uniform_real_distribution<double> ud(0, 1);
  auto draw = [&] {
    LabeledSegment s;
    for (int k = 0; k < 10; ++k) s.features[k] = nd(rng);
    const double p = 1 / (1 + std::exp(-(w_true.dot(s.features) + b_true)));
    s.sky = ud(rng) < p;
    return s;
  };
  std::vector<LabeledSegment> train, held;
  for (int i = 0; i < 200; ++i) train.push_back(draw());
  for (int i = 0; i < 500; ++i) held.push_back(draw());
  auto fit = SkyClassifier::fit(train);
  int agree = 0;
  for (const auto& s : held) agree += fit.is_sky(s.features) == (w_true.dot(s.features) + b_true > 0);
  CHECK(agree / 500.0 >= 0.95);

  auto round = SkyClassifier::from_json(fit.to_json());
  for (const auto& s : held) CHECK(round.probability(s.features) == doctest::Approx(fit.probability(s.features)));
}

TEST_CASE("predict_sky_mask decisions") {
  auto scene = fixtures::sky_scene(32, 32, 1);
  auto seg = a3c_cluster(scene.image, 6);
  SegmentFeatures zero = SegmentFeatures::Zero();
  auto all = predict_sky_mask(scene.image, seg, SkyClassifier(zero, 10.0));
  CHECK((all == 1).all());
  auto half = predict_sky_mask(scene.image, seg, SkyClassifier(zero, 0.0));
  CHECK((half == 0).all());

  Image two(32, 32);
  MaskGrid truth(32, 32);
  for (Index r = 0; r < 32; ++r)
    for (Index c = 0; c < 32; ++c) {
      const bool sky = r < 16;
      sky ? two.set(r, c, 0.5f, 0.7f, 0.95f) : two.set(r, c, 0.2f, 0.3f, 0.1f);
      truth(r, c) = sky;
    }
  auto clf = fit_sky_classifier(std::vector<Image>{two}, std::vector<MaskGrid>{truth}, 4);
  auto pred = predict_sky_mask(two, a3c_cluster(two, 4), clf);
  CHECK(seg_metrics(pred, truth).mean_iou == 1.0);
}

TEST_CASE("apply_sky_selection") {
  auto scene = fixtures::sky_scene(30, 40, 2);
  MaskGrid ones = MaskGrid::Ones(30, 40), zeros = MaskGrid::Zero(30, 40);
  auto full = apply_sky_selection(scene.image, ones, 20, 24);
  CHECK(full.pixels == resize_bilinear(scene.image, 20, 24));
  auto none = apply_sky_selection(scene.image, zeros, 20, 24);
  for (int k = 0; k < 3; ++k) CHECK((none.pixels.channel[k] == 0).all());

  auto grey = filled(30, 40, 0.5f, 0.5f, 0.5f);
  MaskGrid half = MaskGrid::Zero(30, 40);
  half.leftCols(20).setOnes();
  auto sel = apply_sky_selection(grey, half, 17, 23, "rec");
  const MaskGrid resampled = resize_nearest(half, 17, 23);
  Index nonblack = 0;
  for (Index r = 0; r < 17; ++r)
    for (Index c = 0; c < 23; ++c) {
      const bool black = sel.pixels.channel[0](r, c) == 0 && sel.pixels.channel[1](r, c) == 0 &&
                         sel.pixels.channel[2](r, c) == 0;
      nonblack += !black;
      CHECK(black == (resampled(r, c) == 0));
    }
  CHECK(nonblack == resampled.cast<Index>().sum());
  CHECK(sel.provenance == "rec");
  CHECK_THROWS_AS(apply_sky_selection(grey, MaskGrid::Ones(3, 3)), ShapeMismatch);
}

TEST_CASE("seg_metrics") {
  MaskGrid gt(2, 2), pred(2, 2);
  gt << 1, 1, 0, 0;
  pred << 1, 0, 1, 0;
  auto m = seg_metrics(pred, gt);
  CHECK(m.pixel_accuracy == doctest::Approx(0.5));
  CHECK(m.mean_accuracy == doctest::Approx(0.5));
  CHECK(m.mean_iou == doctest::Approx(1.0 / 3));

  auto perfect = seg_metrics(gt, gt);
  CHECK(perfect.pixel_accuracy == 1.0);
  CHECK(perfect.mean_accuracy == 1.0);
  CHECK(perfect.mean_iou == 1.0);

  MaskGrid comp = 1 - gt;
  auto worst = seg_metrics(comp, gt);
  CHECK(worst.pixel_accuracy == 0.0);
  CHECK(worst.mean_accuracy == 0.0);
  CHECK(worst.mean_iou == 0.0);

  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 20; ++t) {
    MaskGrid a(7, 9), b(7, 9);
    for (Index i = 0; i < a.size(); ++i) {
      a(i) = coin(rng);
      b(i) = coin(rng);
    }
    auto x = seg_metrics(a, b);
    auto y = seg_metrics(MaskGrid(1 - a), MaskGrid(1 - b));
    CHECK(x.pixel_accuracy == doctest::Approx(y.pixel_accuracy));
    CHECK(x.mean_accuracy == doctest::Approx(y.mean_accuracy));
    CHECK(x.mean_iou == doctest::Approx(y.mean_iou));
  }
  CHECK_THROWS_AS(seg_metrics(MaskGrid::Ones(2, 3), gt), ShapeMismatch);
}
