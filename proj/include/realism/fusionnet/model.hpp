#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "realism/edgefeat.hpp"
#include "realism/nn/autograd.hpp"
#include "realism/nn/ops.hpp"

namespace realism::fusionnet {

inline constexpr int kStages = 5;

/// Layout: block1, block2 = 2 x (conv3x3 + BN + ReLU) + 2x2 max pool;
/// res1, res2 = residual blocks with conv strides (1, 2); res3 = strides (1, 1);
/// head = flatten -> FC fc_dims[0] -> ReLU -> FC fc_dims[1] -> ReLU -> FC fc_dims[2] -> softmax.
struct ModelSpec {
  Index input_height = 400;
  Index input_width = 400;
  std::array<Index, kStages> stage_channels{64, 128, 256, 256, 256};
  std::array<Index, 3> fc_dims{4096, 1024, 10};
  int n_classes = 10;
  /// Stages whose input is concatenated with the matching edge map.
  std::array<bool, kStages> fusion_sites{true, true, true, true, true};
  int edge_channels = 1;

  static ModelSpec paper_default() { return {}; }
  /// 32x32 input, channels (4, 4, 8, 8, 8), fc (32, 16, n).
  static ModelSpec miniature(int n_classes = 10);

  bool any_fusion() const;
  ModelSpec without_fusion() const;
  void validate() const;

  std::array<PlaneSize, kStages> stage_input_sizes() const;
  std::array<PlaneSize, kStages> stage_output_sizes() const;
  Index flatten_size() const;
  /// Closed-form count of trainable scalars.
  Index parameter_count() const;

  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);
  bool operator==(const ModelSpec&) const = default;
};

/// Network inputs: images (N, 3, H, W) and, per stage, the edge maps (empty tensor
/// at stages without fusion).
template <typename Scalar>
struct ModelInput {
  nn::Var<Scalar> images;
  std::vector<Tensor<Scalar>> edges;

  Index batch() const { return images.shape().n; }
};

/// Images must already be at the spec resolution. The backend may be null only
/// when the spec has no fusion sites.
template <typename Scalar>
ModelInput<Scalar> make_input(const ModelSpec& spec, std::span<const Image> images, const EdgeBackend* backend);

template <typename Scalar>
class FusionNet {
 public:
  FusionNet(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }

  /// Pre-softmax scores (N, n_classes, 1, 1). In training mode batch norm uses
  /// batch statistics and updates its running estimates.
  nn::Var<Scalar> logits(const ModelInput<Scalar>& input, bool training,
                         std::array<Shape, kStages>* stage_shapes = nullptr);
  nn::Var<Scalar> forward(const ModelInput<Scalar>& input, bool training,
                          std::array<Shape, kStages>* stage_shapes = nullptr) {
    return nn::softmax(logits(input, training, stage_shapes));
  }

  nn::ParameterList<Scalar> parameters() const;
  Index parameter_count() const;

  /// Trainable parameters plus batch-norm running statistics, by name.
  std::vector<std::pair<std::string, Tensor<Scalar>*>> state();
  std::vector<std::pair<std::string, const Tensor<Scalar>*>> state() const;

 private:
  struct ConvBn {
    nn::Var<Scalar> weight, gamma, beta;
    nn::BatchNormState<Scalar> bn;
  };
  struct ConvBlock {
    ConvBn a, b;
  };
  struct ResBlock {
    ConvBn a, b;
    int stride_a = 1, stride_b = 1;
    nn::Var<Scalar> proj_weight, proj_bias;  // undefined for identity skips
  };
  struct Dense {
    nn::Var<Scalar> weight, bias;
  };

  ConvBn make_conv_bn(Index in, Index out, std::mt19937_64& rng);
  nn::Var<Scalar> apply(ConvBn& layer, const nn::Var<Scalar>& x, int stride, bool training, bool relu);
  nn::Var<Scalar> stage_input(const nn::Var<Scalar>& x, const ModelInput<Scalar>& input, int stage) const;

  ModelSpec spec_;
  std::array<ConvBlock, 2> blocks_;
  std::array<ResBlock, 3> res_;
  std::array<Dense, 3> head_;
};

/// Mean of -log(max(p[label], floor)) over rows of a posterior matrix.
double ce_loss(const Tensor<double>& posteriors, std::span<const int> labels);

extern template class FusionNet<float>;
extern template class FusionNet<double>;

}  // namespace realism::fusionnet
