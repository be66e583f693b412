#pragma once

#include <span>
#include <vector>

#include "realism/nn/autograd.hpp"

namespace realism::nn {

/// 2-D convolution, square kernel. `weight` is (Cout, Cin, k, k); `bias` is
/// (1, Cout, 1, 1) or undefined.
template <typename Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias, int stride, int pad);

inline Index conv_output_size(Index in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

/// Running statistics of a batch-norm layer; updated in training mode as
/// running = momentum * running + (1 - momentum) * batch.
template <typename Scalar>
struct BatchNormState {
  Tensor<Scalar> running_mean;  // (1, C, 1, 1)
  Tensor<Scalar> running_var;   // (1, C, 1, 1)
  Scalar momentum = Scalar(0.9);
  Scalar eps = Scalar(1e-5);

  BatchNormState() = default;
  explicit BatchNormState(Index channels)
      : running_mean(Shape{1, channels, 1, 1}), running_var(Tensor<Scalar>::constant(Shape{1, channels, 1, 1}, 1)) {}
};

template <typename Scalar>
Var<Scalar> batch_norm(const Var<Scalar>& x, const Var<Scalar>& gamma, const Var<Scalar>& beta,
                       BatchNormState<Scalar>& state, bool training);

/// Per-(sample, channel) normalization over the spatial plane, no affine.
template <typename Scalar>
Var<Scalar> instance_norm(const Var<Scalar>& x, Scalar eps = Scalar(1e-5));

/// y[n,c,:,:] = x[n,c,:,:] * scale[n,c] + shift[n,c]; scale/shift are (N, C, 1, 1).
template <typename Scalar>
Var<Scalar> channel_affine(const Var<Scalar>& x, const Var<Scalar>& scale, const Var<Scalar>& shift);

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& x);
template <typename Scalar>
Var<Scalar> leaky_relu(const Var<Scalar>& x, Scalar slope);
template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x);
template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x);

/// 2x2 max pooling, stride 2 (floor).
template <typename Scalar>
Var<Scalar> max_pool2(const Var<Scalar>& x);
template <typename Scalar>
Var<Scalar> global_avg_pool(const Var<Scalar>& x);
/// Nearest-neighbour 2x upsampling.
template <typename Scalar>
Var<Scalar> upsample2(const Var<Scalar>& x);

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s);
template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s);

/// Concatenates along channels; all inputs share N, H, W.
template <typename Scalar>
Var<Scalar> concat_channels(std::span<const Var<Scalar>> parts);

template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& x, Shape shape);
template <typename Scalar>
Var<Scalar> flatten(const Var<Scalar>& x) {
  return reshape(x, Shape{x.shape().n, x.shape().per_sample(), 1, 1});
}
/// Features [start, start + count) of an (N, F, 1, 1) tensor.
template <typename Scalar>
Var<Scalar> slice_features(const Var<Scalar>& x, Index start, Index count);

/// x is (N, In, 1, 1) (or any shape flattening to In), weight is (Out, In, 1, 1), bias (1, Out, 1, 1).
template <typename Scalar>
Var<Scalar> linear(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias);

/// Row-wise softmax over features of an (N, F, 1, 1) tensor.
template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& logits);

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean over the batch of -log(max(softmax(logits)[label], floor)).
template <typename Scalar>
Var<Scalar> softmax_cross_entropy(const Var<Scalar>& logits, std::span<const int> labels);

template <typename Scalar>
Var<Scalar> mean(const Var<Scalar>& x);
template <typename Scalar>
Var<Scalar> l1_loss(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar>
Var<Scalar> mse_loss(const Var<Scalar>& a, const Var<Scalar>& b);
/// mean((x - target)^2) against a constant.
template <typename Scalar>
Var<Scalar> mse_to_constant(const Var<Scalar>& x, Scalar target);

/// Concatenates along the batch axis.
template <typename Scalar>
Var<Scalar> concat_batch(std::span<const Var<Scalar>> parts);

}  // namespace realism::nn
