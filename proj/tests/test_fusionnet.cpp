#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fusion_fixtures.hpp"
#include "realism/error.hpp"
#include "realism/nn/ops.hpp"
#include "test_util.hpp"

using namespace realism;
using namespace realism::fusionnet;

namespace {

/// Parameter count written out layer by layer for a given spec.
Index hand_count(const ModelSpec& s) {
  const Index e = s.edge_channels;
  auto f = [&](int k) { return s.fusion_sites[k] ? e : 0; };
  const auto& c = s.stage_channels;
  auto cbn = [](Index in, Index out) { return 9 * in * out + 2 * out; };
  Index n = 0;
  n += cbn(3 + f(0), c[0]) + cbn(c[0], c[0]);
  n += cbn(c[0] + f(1), c[1]) + cbn(c[1], c[1]);
  n += cbn(c[1] + f(2), c[2]) + cbn(c[2], c[2]) + (c[1] * c[2] + c[2]);  // stride-2 projection
  n += cbn(c[2] + f(3), c[3]) + cbn(c[3], c[3]) + (c[2] * c[3] + c[3]);
  n += cbn(c[3] + f(4), c[4]) + cbn(c[4], c[4]) + (c[3] != c[4] ? c[3] * c[4] + c[4] : 0);
  const auto out = s.stage_output_sizes();
  Index in = c[4] * out[4].height * out[4].width;
  for (Index d : s.fc_dims) {
    n += in * d + d;
    in = d;
  }
  return n;
}

std::vector<Image> random_images(int n, Index size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image im(size, size);
    for (auto& c : im.channel)
      for (Index j = 0; j < c.size(); ++j) c(j) = u(rng);
    out.push_back(im);
  }
  return out;
}

template <typename Scalar>
bool same_weights(const FusionNet<Scalar>& a, const FusionNet<Scalar>& b) {
  auto sa = a.state(), sb = b.state();
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i)
    if (sa[i].first != sb[i].first || sa[i].second->data != sb[i].second->data) return false;
  return true;
}

}  // namespace

TEST_CASE("stage arithmetic of the default spec") {
  auto spec = ModelSpec::paper_default();
  auto out = spec.stage_output_sizes();
  const Index expect[5] = {200, 100, 50, 25, 25};
  for (int k = 0; k < 5; ++k) {
    CHECK(out[k].height == expect[k]);
    CHECK(out[k].width == expect[k]);
  }
  CHECK(spec.flatten_size() == 25 * 25 * 256);
  CHECK(spec.fc_dims[2] == 10);
  CHECK(spec.parameter_count() == hand_count(spec));
}

TEST_CASE("live forward at 400x400 with narrow channels") {
  auto spec = ModelSpec::paper_default();
  spec.stage_channels = {4, 4, 8, 8, 8};
  spec.fc_dims = {16, 8, 10};
  FusionNet<float> net(spec, 1);
  auto backend = make_edge_backend("fixed");
  auto imgs = random_images(1, 400, 2);
  std::array<Shape, kStages> shapes;
  nn::NoGradGuard ng;
  auto p = net.forward(make_input<float>(spec, imgs, backend.get()), false, &shapes);
  const Index expect[5] = {200, 100, 50, 25, 25};
  for (int k = 0; k < 5; ++k) CHECK(shapes[k].h == expect[k]);
  CHECK(p.shape() == Shape{1, 10, 1, 1});
  CHECK(p.value().data.sum() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("head contract and spec validation") {
  auto spec = ModelSpec::miniature(5);
  FusionNet<float> net(spec, 3);
  auto backend = make_edge_backend("fixed");
  auto imgs = random_images(2, 32, 4);
  auto logits = net.logits(make_input<float>(spec, imgs, backend.get()), false);
  CHECK(logits.shape() == Shape{2, 5, 1, 1});

  auto bad = spec;
  bad.fc_dims[2] = 7;
  CHECK_THROWS_AS(FusionNet<float>(bad, 0), InvalidArgument);
  CHECK_THROWS_AS(make_input<float>(spec, random_images(1, 30, 1), backend.get()), ShapeError);
  CHECK_THROWS_AS(make_input<float>(spec, {}, backend.get()), EmptyBatch);
  CHECK_THROWS_AS(make_input<float>(spec, imgs, nullptr), InvalidArgument);

  auto in = make_input<float>(spec, imgs, backend.get());
  in.edges[2] = Tensor<float>(Shape{2, 1, 4, 4});
  CHECK_THROWS_AS(net.logits(in, false), ShapeError);

  auto round = ModelSpec::from_json(spec.to_json());
  CHECK(round == spec);
}

TEST_CASE("fusion changes only the stage-entry input channels") {
  auto full = ModelSpec::miniature(10);
  auto none = full.without_fusion();
  CHECK(FusionNet<float>(full, 0).parameter_count() == full.parameter_count());
  CHECK(FusionNet<float>(none, 0).parameter_count() == none.parameter_count());
  CHECK(full.parameter_count() == hand_count(full));
  CHECK(none.parameter_count() == hand_count(none));
  Index delta = 0;
  for (int k = 0; k < kStages; ++k) delta += 9 * full.stage_channels[k] * full.edge_channels;
  CHECK(full.parameter_count() - none.parameter_count() == delta);

  auto pf = FusionNet<float>(full, 0).parameters(), pn = FusionNet<float>(none, 0).parameters();
  REQUIRE(pf.size() == pn.size());
  for (std::size_t i = 0; i < pf.size(); ++i) {
    CHECK(pf[i].name == pn[i].name);
    const bool entry = pf[i].name.find(".conv1.weight") != std::string::npos;
    if (entry) {
      CHECK(pf[i].var.shape().c == pn[i].var.shape().c + 1);
    } else {
      CHECK(pf[i].var.shape() == pn[i].var.shape());
    }
  }

  auto one = none;
  one.fusion_sites[3] = true;
  CHECK(one.parameter_count() - none.parameter_count() == 9 * one.stage_channels[3]);
}

TEST_CASE("posteriors lie on the simplex") {
  auto spec = ModelSpec::miniature(10);
  auto backend = make_edge_backend("fixed");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    FusionNet<double> net(spec, seed);
    auto imgs = random_images(3, 32, 100 + seed);
    for (auto& c : imgs[0].channel) c *= 40.0f;  // far outside the usual range
    for (bool training : {false, true}) {
      auto p = net.forward(make_input<double>(spec, imgs, backend.get()), training).value();
      for (Index n = 0; n < 3; ++n) {
        double sum = 0;
        for (Index k = 0; k < 10; ++k) {
          CHECK(p.at(n, k, 0, 0) >= 0.0);
          sum += p.at(n, k, 0, 0);
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("zeroed head gives the uniform posterior; duplicates agree") {
  auto spec = ModelSpec::miniature(10);
  FusionNet<double> net(spec, 5);
  for (auto& p : net.parameters())
    if (p.name.rfind("fc3.", 0) == 0) p.var.mutable_value().data.setZero();
  auto backend = make_edge_backend("fixed");
  auto imgs = random_images(2, 32, 9);
  auto p = net.forward(make_input<double>(spec, imgs, backend.get()), false).value();
  for (Index i = 0; i < p.size(); ++i) CHECK(p.data[i] == doctest::Approx(0.1).epsilon(1e-12));

  FusionNet<float> fresh(spec, 6);
  std::vector<Image> dup{imgs[0], imgs[1], imgs[0]};
  auto q = fresh.forward(make_input<float>(spec, dup, backend.get()), false).value();
  for (Index k = 0; k < 10; ++k) CHECK(q.at(0, k, 0, 0) == q.at(2, k, 0, 0));
}

TEST_CASE("residual block with stride (1,1) reduces to identity when its convs are zero") {
  auto spec = ModelSpec::miniature(10).without_fusion();
  auto imgs = random_images(2, 32, 12);
  auto run = [&](float gamma_scale) {
    FusionNet<double> net(spec, 8);
    for (auto& p : net.parameters()) {
      if (p.name == "res3.conv1.weight" || p.name == "res3.conv2.weight") p.var.mutable_value().data.setZero();
      if (p.name == "res3.conv1.gamma" || p.name == "res3.conv2.gamma") p.var.mutable_value().data *= gamma_scale;
    }
    std::array<Shape, kStages> shapes;
    auto out = net.logits(make_input<double>(spec, imgs, nullptr), false, &shapes).value();
    CHECK(shapes[3] == shapes[4]);
    CHECK(!net.parameters().empty());
    return out;
  };
  // the residual branch contributes nothing, whatever its scale parameters
  auto a = run(1.0f), b = run(7.0f);
  CHECK(a.data == b.data);
  for (const auto& p : FusionNet<float>(spec, 0).parameters()) CHECK(p.name.rfind("res3.proj", 0) != 0);
}

TEST_CASE("ce_loss") {
  Tensor<double> one_hot(Shape{1, 10, 1, 1});
  one_hot.data[3] = 1.0;
  std::vector<int> l3{3};
  CHECK(ce_loss(one_hot, l3) == 0.0);
  auto uniform = Tensor<double>::constant(Shape{1, 10, 1, 1}, 0.1);
  CHECK(ce_loss(uniform, l3) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  Tensor<double> two(Shape{2, 2, 1, 1});
  two.data << 0.7, 0.3, 0.2, 0.8;
  std::vector<int> labels{0, 0};
  CHECK(ce_loss(two, labels) == doctest::Approx((-std::log(0.7) - std::log(0.2)) / 2));
  // floor bounds the loss of a zero probability
  CHECK(ce_loss(one_hot, std::vector<int>{0}) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(ce_loss(two, std::vector<int>{0}), ShapeError);
}

TEST_CASE("weak augmentation") {
  auto im = random_images(1, 16, 3)[0];
  CHECK(apply_weak(im, {}) == im);
  WeakParams flip{true, 0, 0};
  CHECK(apply_weak(apply_weak(im, flip), flip) == im);
  CHECK(apply_weak(im, flip).channel[1](4, 0) == im.channel[1](4, 15));

  WeakParams shift{false, 2, -1};
  auto s = apply_weak(im, shift);
  for (Index r = 0; r < 16; ++r)
    for (Index c = 0; c < 16; ++c) {
      const Index sr = r - shift.dy, sc = c - shift.dx;
      const bool inside = sr >= 0 && sr < 16 && sc >= 0 && sc < 16;
      for (int k = 0; k < 3; ++k) CHECK(s.channel[k](r, c) == (inside ? im.channel[k](sr, sc) : 0.0f));
    }

  std::mt19937_64 rng(1);
  int flips = 0;
  for (int i = 0; i < 400; ++i) {
    auto p = sample_weak(rng, 32, 48);
    flips += p.flip;
    CHECK(std::abs(p.dx) <= 6);
    CHECK(std::abs(p.dy) <= 4);
  }
  CHECK(flips > 150);
  CHECK(flips < 250);
}

TEST_CASE("strong augmentation") {
  auto im = quantize8(random_images(1, 32, 5)[0]);
  for (int op = 0; op < kStrongPoolSize; ++op) {
    StrongOpParams p{static_cast<StrongOp>(op), identity_value(static_cast<StrongOp>(op))};
    CHECK_MESSAGE(apply_strong_op(im, p) == im, to_string(p.op));
  }
  StrongParams corner;
  corner.ops = {StrongOpParams{StrongOp::brightness, 1.0}, StrongOpParams{StrongOp::rotate, 0.0}};
  corner.cutout_side = 8;
  auto out = apply_strong(im, corner);
  for (int k = 0; k < 3; ++k)
    for (Index r = 0; r < 32; ++r)
      for (Index c = 0; c < 32; ++c) {
        const bool in_square = r < 8 && c < 8;
        CHECK(out.channel[k](r, c) == (in_square ? 0.0f : im.channel[k](r, c)));
      }

  std::mt19937_64 rng(7);
  for (int i = 0; i < 60; ++i) {
    const Index h = 20 + i % 7, w = 24 + i % 5;
    auto src = random_images(1, 20, i)[0];
    Image rect(h, w);
    for (int k = 0; k < 3; ++k) rect.channel[k] = resize_bilinear(src.channel[k], h, w);
    auto p = sample_strong(rng, h, w);
    CHECK(p.ops[0].op != p.ops[1].op);
    CHECK(p.cutout_side == std::lround(0.25 * w));
    CHECK(p.cutout_row + p.cutout_side <= h);
    CHECK(p.cutout_col + p.cutout_side <= w);
    auto a = apply_strong(rect, p);
    CHECK(a.height() == h);
    CHECK(a.width() == w);
    for (int k = 0; k < 3; ++k) {
      CHECK((a.channel[k].block(p.cutout_row, p.cutout_col, p.cutout_side, p.cutout_side) == 0.0f).all());
      CHECK(a.channel[k].minCoeff() >= 0.0f);
      CHECK(a.channel[k].maxCoeff() <= 1.0f);
    }
  }
}

TEST_CASE("pseudo labels") {
  PseudoLabelConfig cfg;
  std::vector<double> p(10, 0.03 / 9);
  p[3] = 0.97;
  CHECK(pseudo_label(p, cfg) == 3);
  p.assign(10, 0.1 / 9);
  p[2] = 0.90;
  CHECK(!pseudo_label(p, cfg));
  std::vector<double> uniform(10, 0.1);
  for (double t : {0.2, 0.5, 0.95, 1.0}) {
    cfg.threshold = t;
    CHECK(!pseudo_label(uniform, cfg));
  }
  cfg.threshold = 0.05;
  CHECK(pseudo_label(uniform, cfg) == 0);  // lowest index wins ties
  cfg.threshold = 0.95;
  std::vector<double> at{0.95, 0.05};
  CHECK(!pseudo_label(at, cfg));  // strictly above
  cfg.threshold = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("below-threshold unlabeled examples contribute exactly nothing") {
  auto spec = ModelSpec::miniature(2);
  auto lab = testing::pattern_set(4, 2, 32, 1), unl = testing::pattern_set(8, 2, 32, 2);
  auto ls = testing::as_samples(lab, true, 0), us = testing::as_samples(unl, false, 50);
  auto backend = make_edge_backend("fixed");
  TrainConfig tc;
  tc.seed = 4;
  Trainer<double> supervised(spec, backend, tc), semi(spec, backend, tc);
  PseudoLabelConfig cfg;
  cfg.threshold = 1.0;  // nothing can exceed it
  auto a = supervised_step(supervised, ls, 11);
  auto b = semi_supervised_step(semi, ls, us, cfg, 11);
  CHECK(b.n_confident == 0);
  CHECK(a.total == b.total);
  CHECK(b.total == b.supervised);
  CHECK(same_weights(supervised.model(), semi.model()));

  // mixed confidence: dropping the unconfident examples leaves the loss unchanged
  Trainer<double> t(spec, backend, tc);
  const std::uint64_t step = 21;
  auto state = [&] {
    std::vector<Tensor<double>> s;
    for (auto& [n, p] : t.model().state()) s.push_back(*p);
    return s;
  };
  auto restore = [&](const std::vector<Tensor<double>>& s) {
    std::size_t i = 0;
    for (auto& [n, p] : t.model().state()) *p = s[i++];
  };
  auto saved = state();
  // pseudo labels see the running statistics after this step's labeled forward
  compute_step_loss(t, ls, {}, cfg, step, false);
  std::vector<double> maxp;
  {
    std::vector<Image> weak;
    for (const auto& s : us) {
      auto rng = augmentation_rng(step, s.key, 1);
      weak.push_back(weak_augment(*s.image, rng));
    }
    nn::NoGradGuard ng;
    auto probs = t.model().forward(t.input(weak), false).value();
    for (Index i = 0; i < probs.shape.n; ++i) maxp.push_back(std::max(probs.at(i, 0, 0, 0), probs.at(i, 1, 0, 0)));
  }
  auto sorted = maxp;
  std::sort(sorted.begin(), sorted.end());
  cfg.threshold = 0.5 * (sorted[3] + sorted[4]);
  std::vector<Sample> kept;
  for (std::size_t i = 0; i < us.size(); ++i)
    if (maxp[i] > cfg.threshold) kept.push_back(us[i]);
  REQUIRE(kept.size() == 4);
  restore(saved);
  auto with_all = compute_step_loss(t, ls, us, cfg, step, false);
  restore(saved);
  auto with_kept = compute_step_loss(t, ls, kept, cfg, step, false);
  CHECK(with_all.n_confident == 4);
  CHECK(with_all.total == with_kept.total);
  CHECK(with_all.unsupervised == with_kept.unsupervised);
  CHECK_THROWS_AS(compute_step_loss(t, {}, us, cfg, step, false), EmptyBatch);
}

TEST_CASE("zero unlabeled weight equals a supervised step") {
  auto spec = ModelSpec::miniature(2);
  auto lab = testing::pattern_set(4, 2, 32, 3), unl = testing::pattern_set(6, 2, 32, 4);
  auto ls = testing::as_samples(lab, true, 0), us = testing::as_samples(unl, false, 50);
  auto backend = make_edge_backend("fixed");
  TrainConfig tc;
  tc.seed = 9;
  Trainer<float> a(spec, backend, tc), b(spec, backend, tc);
  PseudoLabelConfig cfg;
  cfg.threshold = 0.01;
  cfg.unlabeled_loss_weight = 0.0;
  for (int s = 0; s < 3; ++s) {
    supervised_step(a, ls, s);
    semi_supervised_step(b, ls, us, cfg, s);
  }
  CHECK(same_weights(a.model(), b.model()));
}

TEST_CASE("gradient check on the miniature spec") {
  for (bool fusion : {true, false}) {
    auto spec = ModelSpec::miniature(3);
    if (!fusion) spec = spec.without_fusion();
    auto g = testing::gradient_check(spec, 120, 17);
    CAPTURE(fusion);
    CAPTURE(g.worst);
    CHECK(g.pass_fraction() >= 0.99);
  }
}

TEST_CASE("training: empty schedule, determinism, learnability") {
  auto spec = ModelSpec::miniature(3);
  auto backend = make_edge_backend("fixed");
  auto set = testing::pattern_set(30, 3, 32, 5);
  auto samples = testing::as_samples(set, true, 0);
  auto dir = testing::scratch_dir("fusionnet_train");

  TrainConfig zero;
  zero.epochs = 0;
  zero.seed = 13;
  Trainer<float> t0(spec, backend, zero);
  auto log0 = train(t0, samples, {}, std::nullopt);
  CHECK(log0.entries.empty());
  save_classifier(dir / "zero.ckpt", t0.model(), {zero.seed, backend->id(), log0});
  FusionNet<float> loaded(spec, 999);
  auto meta = load_classifier(dir / "zero.ckpt", loaded);
  CHECK(meta.seed == 13);
  CHECK(same_weights(loaded, FusionNet<float>(spec, 13)));

  CHECK_THROWS_AS(train(t0, std::span<const Sample>{}, {}, std::nullopt), DataError);

  TrainConfig tc;
  tc.seed = 2;
  tc.steps = 300;
  tc.batch_size = 8;
  tc.learning_rate = 3e-3;
  auto learn = [&] {
    Trainer<float> t(spec, backend, tc);
    auto log = train(t, samples, {}, std::nullopt);
    return std::make_pair(log.totals(), testing::accuracy(t, set));
  };
  auto [trace_a, acc_a] = learn();
  TrainConfig short_cfg = tc;
  short_cfg.steps = 5;
  Trainer<float> s1(spec, backend, short_cfg), s2(spec, backend, short_cfg);
  CHECK(train(s1, samples, {}, std::nullopt).totals() == train(s2, samples, {}, std::nullopt).totals());
  CHECK(trace_a.size() == 300);
  CHECK(acc_a >= 0.95);

  // the fixture itself is linearly separable: softmax regression on raw pixels
  const Index d = 3 * 32 * 32;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, d + 1);
  auto feat = [&](const Image& im) {
    Eigen::VectorXd x(d + 1);
    for (int k = 0; k < 3; ++k) x.segment(k * 1024, 1024) = Eigen::Map<const Eigen::VectorXf>(im.channel[k].data(), 1024).cast<double>();
    x[d] = 1;
    return x;
  };
  for (int epoch = 0; epoch < 200; ++epoch)
    for (std::size_t i = 0; i < set.images.size(); ++i) {
      auto x = feat(set.images[i]);
      Eigen::VectorXd z = w * x;
      Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
      p /= p.sum();
      p[set.labels[i]] -= 1;
      w -= 0.01 * p * x.transpose();
    }
  int ok = 0;
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    Eigen::Index arg;
    (w * feat(set.images[i])).maxCoeff(&arg);
    ok += arg == set.labels[i];
  }
  CHECK(ok / 30.0 >= 0.9);
}

TEST_CASE("checkpoints") {
  auto spec = ModelSpec::miniature(10);
  auto dir = testing::scratch_dir("fusionnet_ckpt");
  FusionNet<float> net(spec, 21);
  TrainLog log;
  log.entries.push_back({"warmup", 0, 0, StepLoss{1.5, 1.5, 0, 0, 0}});
  save_classifier(dir / "m.ckpt", net, {21, "fixed", log});
  CHECK(read_classifier_spec(dir / "m.ckpt") == spec);
  FusionNet<float> back(spec, 1);
  auto meta = load_classifier(dir / "m.ckpt", back);
  CHECK(same_weights(net, back));
  CHECK(meta.edge_backend == "fixed");
  REQUIRE(meta.log.entries.size() == 1);
  CHECK(meta.log.entries[0].loss.total == 1.5);

  FusionNet<float> other(spec.without_fusion(), 1);
  CHECK_THROWS_AS(load_classifier(dir / "m.ckpt", other), ValidationError);
  FusionNet<float> five(ModelSpec::miniature(5), 1);
  CHECK_THROWS_AS(load_classifier(dir / "m.ckpt", five), ValidationError);
}

TEST_CASE("evaluation") {
  std::vector<int> truth{0, 1, 2, 3, 4}, pred = truth;
  auto names = form_abbreviations();
  auto perfect = evaluate_indices(truth, pred, names);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.confusion == Eigen::MatrixXi::Identity(5, 5));
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);

  std::vector<int> constant(5, 2);
  auto c = evaluate_indices(truth, constant, names);
  CHECK(c.accuracy == doctest::Approx(0.2));
  CHECK(c.confusion.col(2).sum() == 5);
  CHECK(c.confusion.sum() == 5);

  auto rec = [](const char* id, CloudLabel l) {
    CorpusRecord r;
    r.id = id;
    r.label10 = l;
    r.label5 = map_to_form(l);
    r.split = Split::test;
    return r;
  };
  std::vector<CorpusRecord> recs{rec("a", CloudLabel::cumulus), rec("b", CloudLabel::stratus),
                                 rec("c", CloudLabel::cumulonimbus)};
  std::vector<int> p10{index_of(CloudLabel::cumulus), index_of(CloudLabel::stratocumulus),
                       index_of(CloudLabel::cumulonimbus)};
  auto five = evaluate_records(recs, p10, Granularity::form5);
  CHECK(five.accuracy == doctest::Approx(2.0 / 3));
  Eigen::MatrixXi off = five.confusion;
  const int st = index_of(CloudForm::stratiform), sc = index_of(CloudForm::stratocumuliform);
  CHECK(off(st, sc) == 1);
  off.diagonal().setZero();
  CHECK(off.sum() == 1);
  auto ten = evaluate_records(recs, p10, Granularity::genus10);
  CHECK(ten.accuracy == doctest::Approx(2.0 / 3));
  CHECK(ten.confusion(index_of(CloudLabel::stratus), index_of(CloudLabel::stratocumulus)) == 1);

  recs[1].label10.reset();
  recs[1].label5.reset();
  recs[1].split = Split::unlabeled;
  CHECK_THROWS_AS(evaluate_records(recs, p10, Granularity::form5), DataError);
}

TEST_CASE("prediction csv round trip") {
  auto dir = testing::scratch_dir("fusionnet_csv");
  Tensor<double> probs(Shape{2, 10, 1, 1});
  probs.data.setConstant(0.05);
  probs.at(0, 4, 0, 0) = 0.55;
  probs.at(1, 9, 0, 0) = 0.55;
  std::vector<std::string> ids{"x", "y"};
  auto rows = prediction_rows(ids, probs);
  CHECK(rows[0].pred10 == 4);
  write_predictions_csv(dir / "p.csv", rows);
  auto back = read_predictions_csv(dir / "p.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].id == "y");
  CHECK(back[1].pred10 == 9);
  CHECK(back[1].pred5() == map_to_form(CloudLabel::stratus));
  CHECK(back[0].posterior[4] == doctest::Approx(0.55));
}
