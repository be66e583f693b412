#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "realism/fixtures.hpp"
#include "realism/fusionnet/evaluate.hpp"
#include "realism/fusionnet/train.hpp"

namespace realism::testing {

struct GradCheck {
  int sampled = 0;
  int passed = 0;
  double worst = 0.0;
  double pass_fraction() const { return sampled ? static_cast<double>(passed) / sampled : 0.0; }
};

/// Central differences of the step loss against the tape gradient on `count`
/// randomly drawn parameter scalars. Model state (including batch-norm running
/// statistics) is restored before every evaluation so each one sees the same
/// function of the weights.
inline GradCheck gradient_check(const fusionnet::ModelSpec& spec, int count, std::uint64_t seed,
                                double tolerance = 1e-4, double h = 1e-6) {
  using namespace fusionnet;
  TrainConfig tc;
  tc.seed = seed;
  Trainer<double> t(spec, spec.any_fusion() ? make_edge_backend("fixed") : nullptr, tc);
  std::mt19937_64 rng(seed);
  std::vector<Image> images;
  for (int i = 0; i < 4; ++i) images.push_back(fixtures::pattern_image(i % spec.n_classes % 3, spec.input_height, rng));
  std::vector<Sample> labeled{{&images[0], 0, 1}, {&images[1], 1 % spec.n_classes, 2}};
  std::vector<Sample> unlabeled{{&images[2], -1, 3}, {&images[3], -1, 4}};
  PseudoLabelConfig pl;
  pl.threshold = 1e-6;  // every unlabeled example is confident
  const std::uint64_t step_seed = seed * 31 + 7;

  std::vector<Tensor<double>> snapshot;
  for (auto& [name, ptr] : t.model().state()) snapshot.push_back(*ptr);
  auto restore = [&] {
    std::size_t i = 0;
    for (auto& [name, ptr] : t.model().state()) {
      const Tensor<double>& saved = snapshot[i++];
      if (name.find("running") != std::string::npos) *ptr = saved;
    }
  };

  auto params = t.model().parameters();
  for (auto& p : params) p.var.zero_grad();
  compute_step_loss(t, labeled, unlabeled, pl, step_seed, true);
  restore();

  std::vector<std::pair<std::size_t, Index>> all;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (Index e = 0; e < params[i].var.value().size(); ++e) all.emplace_back(i, e);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(all.size(), count));

  GradCheck out;
  for (auto [i, e] : all) {
    auto& value = params[i].var.mutable_value().data[e];
    const double analytic = params[i].var.has_grad() ? params[i].var.grad().data[e] : 0.0;
    const double x0 = value;
    value = x0 + h;
    const double up = compute_step_loss(t, labeled, unlabeled, pl, step_seed, false).total;
    restore();
    value = x0 - h;
    const double down = compute_step_loss(t, labeled, unlabeled, pl, step_seed, false).total;
    restore();
    value = x0;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    out.worst = std::max(out.worst, rel);
    ++out.sampled;
    out.passed += rel < tolerance;
  }
  return out;
}

/// Textured two/three-class images: horizontal vs vertical (vs diagonal) stripes.
struct PatternSet {
  std::vector<Image> images;
  std::vector<int> labels;
};

inline PatternSet pattern_set(int n, int classes, Index size, std::uint64_t seed, double noise = 0.15) {
  std::mt19937_64 rng(seed);
  PatternSet s;
  for (int i = 0; i < n; ++i) {
    const int c = i % classes;
    s.images.push_back(fixtures::pattern_image(c, size, rng, noise));
    s.labels.push_back(c);
  }
  return s;
}

inline std::vector<fusionnet::Sample> as_samples(const PatternSet& s, bool with_labels, std::uint64_t key_base) {
  std::vector<fusionnet::Sample> out;
  for (std::size_t i = 0; i < s.images.size(); ++i)
    out.push_back({&s.images[i], with_labels ? s.labels[i] : -1, key_base + i});
  return out;
}

template <typename Scalar>
double accuracy(fusionnet::Trainer<Scalar>& t, const PatternSet& s) {
  auto probs = fusionnet::predict(t.model(), t.backend(), std::span<const Image>(s.images));
  int ok = 0;
  for (std::size_t i = 0; i < s.images.size(); ++i)
    ok += fusionnet::argmax_row(probs, static_cast<Index>(i)) == s.labels[i];
  return static_cast<double>(ok) / s.images.size();
}

struct SemiComparison {
  double supervised = 0.0;
  double semi = 0.0;
};

/// Same step budget for both regimes: the semi-supervised run spends half of it
/// on warm-up and half on self-training.
inline SemiComparison compare_semi(std::uint64_t seed, int labeled = 20, int unlabeled = 200, int steps = 200) {
  using namespace fusionnet;
  auto spec = ModelSpec::miniature(2);
  auto lab = pattern_set(labeled, 2, spec.input_height, seed * 3 + 1, 0.35);
  auto unl = pattern_set(unlabeled, 2, spec.input_height, seed * 3 + 2, 0.35);
  auto test = pattern_set(200, 2, spec.input_height, seed * 3 + 3, 0.35);
  auto ls = as_samples(lab, true, 0), us = as_samples(unl, false, 100000);
  auto backend = make_edge_backend("fixed");
  TrainConfig tc;
  tc.seed = seed;
  tc.learning_rate = 1e-3;
  tc.batch_size = 8;
  SemiComparison r;
  {
    tc.steps = steps;
    Trainer<float> t(spec, backend, tc);
    train(t, ls, {}, std::nullopt);
    r.supervised = accuracy(t, test);
  }
  {
    tc.steps = steps / 2;
    Trainer<float> t(spec, backend, tc);
    SemiConfig semi;
    semi.pseudo.threshold = 0.95;
    semi.steps_per_round = steps - steps / 2;
    semi.unlabeled_batch_size = 16;
    train(t, ls, us, semi);
    r.semi = accuracy(t, test);
  }
  return r;
}

}  // namespace realism::testing
