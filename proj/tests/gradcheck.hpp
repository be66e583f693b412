#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "realism/nn/autograd.hpp"

namespace realism::testing {

struct GradCheckResult {
  int checked = 0;
  int passed = 0;
  double worst = 0.0;
  double pass_fraction() const { return checked ? double(passed) / checked : 1.0; }
};

/// Compares analytic gradients of `loss()` against central differences on
/// `samples` randomly chosen coordinates across `inputs`.
inline GradCheckResult grad_check(const std::function<nn::Var<double>()>& loss, std::vector<nn::Var<double>> inputs,
                                  int samples, std::uint64_t seed, double tol = 1e-4, double h = 1e-6,
                                  double abs_floor = 1e-8) {
  for (auto& v : inputs) v.zero_grad();
  auto out = loss();
  nn::backward(out);
  std::vector<std::pair<std::size_t, Index>> coords;
  Index total = 0;
  for (auto& v : inputs) total += v.value().size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, total - 1);
  GradCheckResult r;
  for (int s = 0; s < samples; ++s) {
    Index flat = pick(rng);
    std::size_t k = 0;
    while (flat >= inputs[k].value().size()) flat -= inputs[k++].value().size();
    auto& v = inputs[k];
    const double analytic = v.has_grad() ? v.grad().data[flat] : 0.0;
    double& x = v.mutable_value().data[flat];
    const double x0 = x;
    double fp, fm;
    {
      nn::NoGradGuard ng;
      x = x0 + h;
      fp = loss().item();
      x = x0 - h;
      fm = loss().item();
    }
    x = x0;
    const double numeric = (fp - fm) / (2 * h);
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    ++r.checked;
    if (err < tol || std::abs(analytic - numeric) < abs_floor) ++r.passed;
    r.worst = std::max(r.worst, err);
  }
  return r;
}

}  // namespace realism::testing
