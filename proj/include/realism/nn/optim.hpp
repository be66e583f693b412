#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "realism/nn/autograd.hpp"

namespace realism::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Parameters whose grad was never touched
/// in a step keep their value and moments.
template <typename Scalar>
class Adam {
 public:
  Adam(ParameterList<Scalar> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
      m_.push_back(Tensor<Scalar>::zeros(p.var.shape()));
      v_.push_back(Tensor<Scalar>::zeros(p.var.shape()));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  void step() {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(config_.beta1), b2 = static_cast<Scalar>(config_.beta2);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta1, t_));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta2, t_));
    const Scalar lr = static_cast<Scalar>(config_.learning_rate), eps = static_cast<Scalar>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& var = params_[i].var;
      if (!var.has_grad()) continue;
      const auto g = var.grad().data.array();
      auto m = m_[i].data.array();
      auto v = v_[i].data.array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      var.mutable_value().data.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }
  const ParameterList<Scalar>& parameters() const { return params_; }

 private:
  ParameterList<Scalar> params_;
  AdamConfig config_;
  std::vector<Tensor<Scalar>> m_, v_;
  long t_ = 0;
};

/// He-normal initialization with the given fan-in.
template <typename Scalar>
Tensor<Scalar> he_normal(Shape shape, Index fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data[i] = static_cast<Scalar>(dist(rng));
  return t;
}

template <typename Scalar>
Tensor<Scalar> uniform_init(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data[i] = static_cast<Scalar>(dist(rng));
  return t;
}

}  // namespace realism::nn
