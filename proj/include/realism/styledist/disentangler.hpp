#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "realism/nn/autograd.hpp"
#include "realism/nn/optim.hpp"
#include "realism/styledist/metrics.hpp"

namespace realism::styledist {

struct DisentangleConfig {
  Index resolution = 64;
  int style_dim = 8;
  int base_channels = 16;
  int mlp_dim = 32;
  int steps = 2000;
  int batch_size = 4;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double w_image = 10.0;
  double w_content = 1.0;
  /// Style-latent reconstruction; 0 removes the term.
  double w_style = 0.0;
  double w_gan = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static DisentangleConfig from_json(const std::string& text);
};

struct DisentangleLosses {
  double recon_a = 0.0, recon_p = 0.0;      // image reconstruction L1
  double content_a = 0.0, content_p = 0.0;  // content reconstruction L1
  double style_a = 0.0, style_p = 0.0;      // style-latent reconstruction L1 (0 when disabled)
  double gen_gan = 0.0, dis_gan = 0.0;
  double total_gen = 0.0;
};

/// Per-domain generator: content encoder (conv, two stride-2 convs, residual
/// block with instance norm), style encoder (strided convs, global average pool,
/// linear to d), decoder (AdaIN residual block driven by an MLP of the style,
/// two upsample+conv stages, sigmoid output).
class DomainGenerator {
 public:
  DomainGenerator(const DisentangleConfig& cfg, std::mt19937_64& rng);

  nn::Var<float> content(const nn::Var<float>& x) const;
  nn::Var<float> style(const nn::Var<float>& x) const;
  nn::Var<float> decode(const nn::Var<float>& content, const nn::Var<float>& style) const;

  nn::ParameterList<float> parameters(const std::string& prefix) const;

 private:
  struct Conv {
    nn::Var<float> weight, bias;
    int stride = 1, pad = 1;
  };
  Conv make_conv(Index in, Index out, int k, int stride, std::mt19937_64& rng);
  static nn::Var<float> run(const Conv& c, const nn::Var<float>& x);

  Index c1_, c2_, c3_;
  Conv ce1_, ce2_, ce3_, cres1_, cres2_;
  Conv se1_, se2_, se3_;
  nn::Var<float> s_w_, s_b_;
  nn::Var<float> mlp1_w_, mlp1_b_, mlp2_w_, mlp2_b_;
  Conv dres1_, dres2_, dup1_, dup2_, dout_;
};

class PatchDiscriminator {
 public:
  PatchDiscriminator(const DisentangleConfig& cfg, std::mt19937_64& rng);
  nn::Var<float> operator()(const nn::Var<float>& x) const;
  nn::ParameterList<float> parameters(const std::string& prefix) const;

 private:
  nn::Var<float> w1_, b1_, w2_, b2_, w3_, b3_;
};

/// Toy two-domain content/style disentangler trained with adversarial,
/// image-reconstruction and content-reconstruction losses.
class Disentangler {
 public:
  enum class Domain { a, p };

  explicit Disentangler(const DisentangleConfig& cfg, std::string id = "style");

  const DisentangleConfig& config() const { return cfg_; }
  const std::string& id() const { return id_; }

  DisentangleLosses step(std::span<const Image> batch_a, std::span<const Image> batch_p, std::mt19937_64& rng);

  /// Codec of one domain; valid while this object lives.
  const StyleCodec& codec(Domain d) const;

  void save(const std::filesystem::path& path) const;
  static Disentangler load(const std::filesystem::path& path);

  const std::vector<DisentangleLosses>& log() const { return log_; }
  std::vector<DisentangleLosses>& mutable_log() { return log_; }

 private:
  class Codec;
  nn::ParameterList<float> generator_parameters() const;
  nn::ParameterList<float> discriminator_parameters() const;
  void build_optimizers();

  DisentangleConfig cfg_;
  std::string id_;
  std::mt19937_64 init_rng_;
  DomainGenerator gen_a_, gen_p_;
  PatchDiscriminator dis_a_, dis_p_;
  std::unique_ptr<nn::Adam<float>> gen_opt_, dis_opt_;
  std::shared_ptr<Codec> codec_a_, codec_p_;
  std::vector<DisentangleLosses> log_;
};

/// Resizes (bilinear) to the style resolution when needed.
std::vector<Image> to_style_resolution(std::span<const Image> images, Index resolution);

/// Trains on the two sets for cfg.steps steps; batches are drawn uniformly with
/// replacement from each set by a generator seeded from cfg.seed.
Disentangler train_disentangler(std::span<const Image> set_a, std::span<const Image> set_p,
                                const DisentangleConfig& cfg, std::string id = "style");

/// IOB(M) / IOB(A) with M = A ∪ P: trains A->P and M->P with the same config.
struct RStyleResult {
  double r_style = 0.0;
  double iob_a = 0.0;
  double iob_m = 0.0;
};
RStyleResult r_style(std::span<const Image> set_a, std::span<const Image> set_p, const DisentangleConfig& cfg);

}  // namespace realism::styledist
