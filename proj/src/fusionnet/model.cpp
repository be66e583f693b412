#include "realism/fusionnet/model.hpp"

#include <cmath>

#include "json.hpp"
#include "realism/error.hpp"
#include "realism/nn/optim.hpp"

namespace realism::fusionnet {

ModelSpec ModelSpec::miniature(int n_classes) {
  ModelSpec s;
  s.input_height = s.input_width = 32;
  s.stage_channels = {4, 4, 8, 8, 8};
  s.fc_dims = {32, 16, n_classes};
  s.n_classes = n_classes;
  return s;
}

bool ModelSpec::any_fusion() const {
  for (bool f : fusion_sites)
    if (f) return true;
  return false;
}

ModelSpec ModelSpec::without_fusion() const {
  ModelSpec s = *this;
  s.fusion_sites.fill(false);
  return s;
}

void ModelSpec::validate() const {
  if (input_height < 4 || input_width < 4) throw InvalidArgument("model input must be at least 4x4");
  for (Index c : stage_channels)
    if (c <= 0) throw InvalidArgument("stage channels must be positive");
  for (Index f : fc_dims)
    if (f <= 0) throw InvalidArgument("fc dims must be positive");
  if (n_classes < 2) throw InvalidArgument("n_classes must be at least 2");
  if (fc_dims[2] != n_classes) throw InvalidArgument("last fc dim must equal n_classes");
  if (any_fusion() && edge_channels <= 0) throw InvalidArgument("edge_channels must be positive when fusing");
  for (const auto& s : stage_output_sizes())
    if (s.height <= 0 || s.width <= 0) throw InvalidArgument("input too small for the stage layout");
}

std::array<PlaneSize, kStages> ModelSpec::stage_input_sizes() const {
  std::array<PlaneSize, kStages> in{};
  PlaneSize s{input_height, input_width};
  const auto out = stage_output_sizes();
  in[0] = s;
  for (int k = 1; k < kStages; ++k) in[k] = out[k - 1];
  return in;
}

std::array<PlaneSize, kStages> ModelSpec::stage_output_sizes() const {
  std::array<PlaneSize, kStages> out{};
  PlaneSize s{input_height, input_width};
  for (int k = 0; k < 2; ++k) {
    s = {s.height / 2, s.width / 2};
    out[k] = s;
  }
  const int strides[3] = {2, 2, 1};
  for (int k = 0; k < 3; ++k) {
    s = {nn::conv_output_size(s.height, 3, strides[k], 1), nn::conv_output_size(s.width, 3, strides[k], 1)};
    out[2 + k] = s;
  }
  return out;
}

Index ModelSpec::flatten_size() const {
  const auto out = stage_output_sizes();
  return stage_channels[4] * out[4].height * out[4].width;
}

Index ModelSpec::parameter_count() const {
  Index total = 0;
  Index prev = 3;
  auto conv_bn = [&](Index in, Index out) { total += out * in * 9 + 2 * out; };
  for (int k = 0; k < kStages; ++k) {
    const Index in = prev + (fusion_sites[k] ? edge_channels : 0);
    const Index c = stage_channels[k];
    conv_bn(in, c);
    conv_bn(c, c);
    if (k >= 2) {
      const bool strided = k < 4;
      if (strided || prev != c) total += c * prev + c;
    }
    prev = c;
  }
  Index in = flatten_size();
  for (Index f : fc_dims) {
    total += f * in + f;
    in = f;
  }
  return total;
}

std::string ModelSpec::to_json() const {
  nlohmann::ordered_json j;
  j["input_height"] = input_height;
  j["input_width"] = input_width;
  j["stage_channels"] = stage_channels;
  j["fc_dims"] = fc_dims;
  j["n_classes"] = n_classes;
  j["fusion_sites"] = fusion_sites;
  j["edge_channels"] = edge_channels;
  return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model spec: ") + e.what());
  }
  ModelSpec s;
  try {
    s.input_height = j.value("input_height", s.input_height);
    s.input_width = j.value("input_width", s.input_width);
    if (j.contains("stage_channels")) s.stage_channels = j.at("stage_channels").get<std::array<Index, kStages>>();
    if (j.contains("fc_dims")) s.fc_dims = j.at("fc_dims").get<std::array<Index, 3>>();
    s.n_classes = j.value("n_classes", static_cast<int>(s.fc_dims[2]));
    if (j.contains("fusion_sites")) s.fusion_sites = j.at("fusion_sites").get<std::array<bool, kStages>>();
    s.edge_channels = j.value("edge_channels", s.edge_channels);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model spec: ") + e.what());
  }
  s.validate();
  return s;
}

template <typename Scalar>
ModelInput<Scalar> make_input(const ModelSpec& spec, std::span<const Image> images, const EdgeBackend* backend) {
  if (images.empty()) throw EmptyBatch("no images for the model");
  for (const auto& im : images)
    if (im.height() != spec.input_height || im.width() != spec.input_width)
      throw ShapeError("image " + std::to_string(im.height()) + "x" + std::to_string(im.width()) +
                       " does not match model input " + std::to_string(spec.input_height) + "x" +
                       std::to_string(spec.input_width));
  ModelInput<Scalar> in;
  in.images = nn::Var<Scalar>(to_tensor<Scalar>(images), false);
  in.edges.resize(kStages);
  if (!spec.any_fusion()) return in;
  if (!backend) throw InvalidArgument("fusion model needs an edge backend");
  if (backend->channels() != spec.edge_channels)
    throw ShapeError("edge backend has " + std::to_string(backend->channels()) + " channels, model expects " +
                     std::to_string(spec.edge_channels));
  const auto sizes = spec.stage_input_sizes();
  std::vector<PlaneSize> wanted;
  for (int k = 0; k < kStages; ++k)
    if (spec.fusion_sites[k]) wanted.push_back(sizes[k]);
  std::vector<EdgePyramid> pyramids;
  pyramids.reserve(images.size());
  for (const auto& im : images) pyramids.push_back(backend->compute(im, wanted));
  std::size_t level = 0;
  for (int k = 0; k < kStages; ++k)
    if (spec.fusion_sites[k]) in.edges[k] = edge_level_tensor<Scalar>(pyramids, level++);
  return in;
}

template <typename Scalar>
typename FusionNet<Scalar>::ConvBn FusionNet<Scalar>::make_conv_bn(Index in, Index out, std::mt19937_64& rng) {
  ConvBn l;
  const Index fan_in = in * 9;
  l.weight = nn::Var<Scalar>(nn::uniform_init<Scalar>(Shape{out, in, 3, 3}, std::sqrt(6.0 / fan_in), rng), true);
  l.gamma = nn::Var<Scalar>(Tensor<Scalar>::constant(Shape{1, out, 1, 1}, 1), true);
  l.beta = nn::Var<Scalar>(Tensor<Scalar>(Shape{1, out, 1, 1}), true);
  l.bn = nn::BatchNormState<Scalar>(out);
  return l;
}

template <typename Scalar>
FusionNet<Scalar>::FusionNet(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  Index prev = 3;
  auto in_channels = [&](int k) { return prev + (spec_.fusion_sites[k] ? spec_.edge_channels : 0); };
  for (int k = 0; k < 2; ++k) {
    const Index c = spec_.stage_channels[k];
    blocks_[k].a = make_conv_bn(in_channels(k), c, rng);
    blocks_[k].b = make_conv_bn(c, c, rng);
    prev = c;
  }
  const int second_stride[3] = {2, 2, 1};
  for (int r = 0; r < 3; ++r) {
    const int k = r + 2;
    const Index c = spec_.stage_channels[k];
    auto& blk = res_[r];
    blk.a = make_conv_bn(in_channels(k), c, rng);
    blk.b = make_conv_bn(c, c, rng);
    blk.stride_b = second_stride[r];
    if (blk.stride_b != 1 || prev != c) {
      blk.proj_weight = nn::Var<Scalar>(nn::uniform_init<Scalar>(Shape{c, prev, 1, 1}, std::sqrt(6.0 / prev), rng), true);
      blk.proj_bias = nn::Var<Scalar>(Tensor<Scalar>(Shape{1, c, 1, 1}), true);
    }
    prev = c;
  }
  Index in = spec_.flatten_size();
  for (int f = 0; f < 3; ++f) {
    const Index out = spec_.fc_dims[f];
    head_[f].weight = nn::Var<Scalar>(nn::uniform_init<Scalar>(Shape{out, in, 1, 1}, std::sqrt(6.0 / in), rng), true);
    head_[f].bias = nn::Var<Scalar>(Tensor<Scalar>(Shape{1, out, 1, 1}), true);
    in = out;
  }
}

template <typename Scalar>
nn::Var<Scalar> FusionNet<Scalar>::apply(ConvBn& layer, const nn::Var<Scalar>& x, int stride, bool training,
                                         bool relu) {
  auto y = nn::batch_norm(nn::conv2d(x, layer.weight, nn::Var<Scalar>(), stride, 1), layer.gamma, layer.beta,
                          layer.bn, training);
  return relu ? nn::relu(y) : y;
}

template <typename Scalar>
nn::Var<Scalar> FusionNet<Scalar>::stage_input(const nn::Var<Scalar>& x, const ModelInput<Scalar>& input,
                                               int stage) const {
  if (!spec_.fusion_sites[stage]) return x;
  if (input.edges.size() != kStages || input.edges[stage].empty())
    throw ShapeError("missing edge map for fusion stage " + std::to_string(stage + 1));
  const Shape es = input.edges[stage].shape;
  const Shape xs = x.shape();
  if (es.n != xs.n || es.h != xs.h || es.w != xs.w || es.c != spec_.edge_channels)
    throw ShapeError("edge map " + es.str() + " misaligned with stage " + std::to_string(stage + 1) + " input " +
                     xs.str());
  std::vector<nn::Var<Scalar>> parts{x, nn::Var<Scalar>(input.edges[stage], false)};
  return nn::concat_channels<Scalar>(parts);
}

template <typename Scalar>
nn::Var<Scalar> FusionNet<Scalar>::logits(const ModelInput<Scalar>& input, bool training,
                                          std::array<Shape, kStages>* stage_shapes) {
  nn::Var<Scalar> x = input.images;
  if (x.shape().c != 3 || x.shape().h != spec_.input_height || x.shape().w != spec_.input_width)
    throw ShapeError("model input " + x.shape().str() + " does not match spec");
  for (int k = 0; k < 2; ++k) {
    auto h = apply(blocks_[k].a, stage_input(x, input, k), 1, training, true);
    h = apply(blocks_[k].b, h, 1, training, true);
    x = nn::max_pool2(h);
    if (stage_shapes) (*stage_shapes)[k] = x.shape();
  }
  for (int r = 0; r < 3; ++r) {
    const int k = r + 2;
    auto& blk = res_[r];
    auto h = apply(blk.a, stage_input(x, input, k), blk.stride_a, training, true);
    h = apply(blk.b, h, blk.stride_b, training, false);
    auto skip = blk.proj_weight.defined() ? nn::conv2d(x, blk.proj_weight, blk.proj_bias, blk.stride_b, 0) : x;
    x = nn::relu(nn::add(h, skip));
    if (stage_shapes) (*stage_shapes)[k] = x.shape();
  }
  x = nn::flatten(x);
  for (int f = 0; f < 3; ++f) {
    x = nn::linear(x, head_[f].weight, head_[f].bias);
    if (f < 2) x = nn::relu(x);
  }
  return x;
}

template <typename Scalar>
nn::ParameterList<Scalar> FusionNet<Scalar>::parameters() const {
  nn::ParameterList<Scalar> out;
  auto conv_bn = [&](const std::string& name, const ConvBn& l) {
    out.push_back({name + ".weight", l.weight});
    out.push_back({name + ".gamma", l.gamma});
    out.push_back({name + ".beta", l.beta});
  };
  for (int k = 0; k < 2; ++k) {
    const std::string b = "block" + std::to_string(k + 1);
    conv_bn(b + ".conv1", blocks_[k].a);
    conv_bn(b + ".conv2", blocks_[k].b);
  }
  for (int r = 0; r < 3; ++r) {
    const std::string b = "res" + std::to_string(r + 1);
    conv_bn(b + ".conv1", res_[r].a);
    conv_bn(b + ".conv2", res_[r].b);
    if (res_[r].proj_weight.defined()) {
      out.push_back({b + ".proj.weight", res_[r].proj_weight});
      out.push_back({b + ".proj.bias", res_[r].proj_bias});
    }
  }
  for (int f = 0; f < 3; ++f) {
    const std::string b = "fc" + std::to_string(f + 1);
    out.push_back({b + ".weight", head_[f].weight});
    out.push_back({b + ".bias", head_[f].bias});
  }
  return out;
}

template <typename Scalar>
Index FusionNet<Scalar>::parameter_count() const {
  Index n = 0;
  for (const auto& p : parameters()) n += p.var.value().size();
  return n;
}

template <typename Scalar>
std::vector<std::pair<std::string, Tensor<Scalar>*>> FusionNet<Scalar>::state() {
  std::vector<std::pair<std::string, Tensor<Scalar>*>> out;
  for (auto& p : parameters()) out.emplace_back(p.name, &p.var.mutable_value());
  auto bn = [&](const std::string& name, ConvBn& l) {
    out.emplace_back(name + ".running_mean", &l.bn.running_mean);
    out.emplace_back(name + ".running_var", &l.bn.running_var);
  };
  for (int k = 0; k < 2; ++k) {
    const std::string b = "block" + std::to_string(k + 1);
    bn(b + ".conv1", blocks_[k].a);
    bn(b + ".conv2", blocks_[k].b);
  }
  for (int r = 0; r < 3; ++r) {
    const std::string b = "res" + std::to_string(r + 1);
    bn(b + ".conv1", res_[r].a);
    bn(b + ".conv2", res_[r].b);
  }
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, const Tensor<Scalar>*>> FusionNet<Scalar>::state() const {
  std::vector<std::pair<std::string, const Tensor<Scalar>*>> out;
  for (const auto& [name, t] : const_cast<FusionNet*>(this)->state()) out.emplace_back(name, t);
  return out;
}

double ce_loss(const Tensor<double>& posteriors, std::span<const int> labels) {
  const Index n = posteriors.shape.n, f = posteriors.shape.per_sample();
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("ce_loss: label count mismatch");
  if (n == 0) throw EmptyBatch("ce_loss of an empty batch");
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= f) throw InvalidArgument("ce_loss: label out of range");
    total -= std::log(std::max(posteriors.data[i * f + labels[i]], nn::kProbabilityFloor));
  }
  return total / static_cast<double>(n);
}

template class FusionNet<float>;
template class FusionNet<double>;
template ModelInput<float> make_input<float>(const ModelSpec&, std::span<const Image>, const EdgeBackend*);
template ModelInput<double> make_input<double>(const ModelSpec&, std::span<const Image>, const EdgeBackend*);

}  // namespace realism::fusionnet
