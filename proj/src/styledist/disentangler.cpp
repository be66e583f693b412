#include "realism/styledist/disentangler.hpp"

#include <cmath>

#include "json.hpp"
#include "realism/error.hpp"
#include "realism/nn/checkpoint.hpp"
#include "realism/nn/ops.hpp"

namespace realism::styledist {

using nn::Var;

void DisentangleConfig::validate() const {
  if (resolution < 8 || resolution % 4 != 0) throw InvalidArgument("style resolution must be a multiple of 4, >= 8");
  if (style_dim < 1 || base_channels < 1 || mlp_dim < 1) throw InvalidArgument("style model sizes must be positive");
  if (steps < 0 || batch_size < 1) throw InvalidArgument("style training needs steps >= 0 and batch_size >= 1");
  if (!(learning_rate > 0)) throw InvalidArgument("style learning rate must be positive");
}

std::string DisentangleConfig::to_json() const {
  nlohmann::ordered_json j{{"resolution", resolution}, {"style_dim", style_dim}, {"base_channels", base_channels},
                           {"mlp_dim", mlp_dim},       {"steps", steps},         {"batch_size", batch_size},
                           {"learning_rate", learning_rate}, {"beta1", beta1},   {"beta2", beta2},
                           {"w_image", w_image},       {"w_content", w_content}, {"w_style", w_style},
                           {"w_gan", w_gan},           {"seed", seed}};
  return j.dump();
}

DisentangleConfig DisentangleConfig::from_json(const std::string& text) {
  DisentangleConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.resolution = j.value("resolution", c.resolution);
    c.style_dim = j.value("style_dim", c.style_dim);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.mlp_dim = j.value("mlp_dim", c.mlp_dim);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.w_image = j.value("w_image", c.w_image);
    c.w_content = j.value("w_content", c.w_content);
    c.w_style = j.value("w_style", c.w_style);
    c.w_gan = j.value("w_gan", c.w_gan);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("style config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

Var<float> param(Tensor<float> t) { return Var<float>(std::move(t), true); }

Var<float> dense_weight(Index out, Index in, std::mt19937_64& rng) {
  return param(nn::uniform_init<float>(Shape{out, in, 1, 1}, std::sqrt(6.0 / in), rng));
}

Var<float> zeros(Shape s) { return param(Tensor<float>(s)); }

}  // namespace

DomainGenerator::Conv DomainGenerator::make_conv(Index in, Index out, int k, int stride, std::mt19937_64& rng) {
  Conv c;
  c.weight = param(nn::uniform_init<float>(Shape{out, in, k, k}, std::sqrt(6.0 / (in * k * k)), rng));
  c.bias = zeros(Shape{1, out, 1, 1});
  c.stride = stride;
  c.pad = k / 2;
  return c;
}

Var<float> DomainGenerator::run(const Conv& c, const Var<float>& x) { return nn::conv2d(x, c.weight, c.bias, c.stride, c.pad); }

DomainGenerator::DomainGenerator(const DisentangleConfig& cfg, std::mt19937_64& rng)
    : c1_(cfg.base_channels), c2_(2 * cfg.base_channels), c3_(2 * cfg.base_channels) {
  ce1_ = make_conv(3, c1_, 3, 1, rng);
  ce2_ = make_conv(c1_, c2_, 3, 2, rng);
  ce3_ = make_conv(c2_, c3_, 3, 2, rng);
  cres1_ = make_conv(c3_, c3_, 3, 1, rng);
  cres2_ = make_conv(c3_, c3_, 3, 1, rng);
  se1_ = make_conv(3, c1_, 3, 1, rng);
  se2_ = make_conv(c1_, c2_, 3, 2, rng);
  se3_ = make_conv(c2_, c2_, 3, 2, rng);
  s_w_ = dense_weight(cfg.style_dim, c2_, rng);
  s_b_ = zeros(Shape{1, cfg.style_dim, 1, 1});
  mlp1_w_ = dense_weight(cfg.mlp_dim, cfg.style_dim, rng);
  mlp1_b_ = zeros(Shape{1, cfg.mlp_dim, 1, 1});
  mlp2_w_ = dense_weight(4 * c3_, cfg.mlp_dim, rng);
  mlp2_b_ = zeros(Shape{1, 4 * c3_, 1, 1});
  dres1_ = make_conv(c3_, c3_, 3, 1, rng);
  dres2_ = make_conv(c3_, c3_, 3, 1, rng);
  dup1_ = make_conv(c3_, c2_, 3, 1, rng);
  dup2_ = make_conv(c2_, c1_, 3, 1, rng);
  dout_ = make_conv(c1_, 3, 3, 1, rng);
}

Var<float> DomainGenerator::content(const Var<float>& x) const {
  auto h = nn::relu(nn::instance_norm(run(ce1_, x)));
  h = nn::relu(nn::instance_norm(run(ce2_, h)));
  h = nn::relu(nn::instance_norm(run(ce3_, h)));
  auto r = nn::relu(nn::instance_norm(run(cres1_, h)));
  r = nn::instance_norm(run(cres2_, r));
  return nn::add(h, r);
}

Var<float> DomainGenerator::style(const Var<float>& x) const {
  auto h = nn::relu(run(se1_, x));
  h = nn::relu(run(se2_, h));
  h = nn::relu(run(se3_, h));
  return nn::linear(nn::global_avg_pool(h), s_w_, s_b_);
}

Var<float> DomainGenerator::decode(const Var<float>& content, const Var<float>& style) const {
  auto params = nn::linear(nn::relu(nn::linear(style, mlp1_w_, mlp1_b_)), mlp2_w_, mlp2_b_);
  auto adain = [&](const Var<float>& x, int layer) {
    auto scale = nn::add_scalar(nn::slice_features(params, 2 * layer * c3_, c3_), 1.0f);
    auto shift = nn::slice_features(params, (2 * layer + 1) * c3_, c3_);
    return nn::channel_affine(nn::instance_norm(x), scale, shift);
  };
  auto r = nn::relu(adain(run(dres1_, content), 0));
  r = adain(run(dres2_, r), 1);
  auto h = nn::add(content, r);
  h = nn::relu(run(dup1_, nn::upsample2(h)));
  h = nn::relu(run(dup2_, nn::upsample2(h)));
  return nn::sigmoid(run(dout_, h));
}

nn::ParameterList<float> DomainGenerator::parameters(const std::string& p) const {
  nn::ParameterList<float> out;
  auto conv = [&](const std::string& n, const Conv& c) {
    out.push_back({p + n + ".weight", c.weight});
    out.push_back({p + n + ".bias", c.bias});
  };
  conv("content.conv1", ce1_);
  conv("content.conv2", ce2_);
  conv("content.conv3", ce3_);
  conv("content.res1", cres1_);
  conv("content.res2", cres2_);
  conv("style.conv1", se1_);
  conv("style.conv2", se2_);
  conv("style.conv3", se3_);
  out.push_back({p + "style.fc.weight", s_w_});
  out.push_back({p + "style.fc.bias", s_b_});
  out.push_back({p + "decoder.mlp1.weight", mlp1_w_});
  out.push_back({p + "decoder.mlp1.bias", mlp1_b_});
  out.push_back({p + "decoder.mlp2.weight", mlp2_w_});
  out.push_back({p + "decoder.mlp2.bias", mlp2_b_});
  conv("decoder.res1", dres1_);
  conv("decoder.res2", dres2_);
  conv("decoder.up1", dup1_);
  conv("decoder.up2", dup2_);
  conv("decoder.out", dout_);
  return out;
}

PatchDiscriminator::PatchDiscriminator(const DisentangleConfig& cfg, std::mt19937_64& rng) {
  const Index c1 = cfg.base_channels, c2 = 2 * cfg.base_channels;
  w1_ = param(nn::uniform_init<float>(Shape{c1, 3, 3, 3}, std::sqrt(6.0 / 27), rng));
  b1_ = zeros(Shape{1, c1, 1, 1});
  w2_ = param(nn::uniform_init<float>(Shape{c2, c1, 3, 3}, std::sqrt(6.0 / (9 * c1)), rng));
  b2_ = zeros(Shape{1, c2, 1, 1});
  w3_ = param(nn::uniform_init<float>(Shape{1, c2, 1, 1}, std::sqrt(6.0 / c2), rng));
  b3_ = zeros(Shape{1, 1, 1, 1});
}

Var<float> PatchDiscriminator::operator()(const Var<float>& x) const {
  auto h = nn::leaky_relu(nn::conv2d(x, w1_, b1_, 2, 1), 0.2f);
  h = nn::leaky_relu(nn::conv2d(h, w2_, b2_, 2, 1), 0.2f);
  return nn::conv2d(h, w3_, b3_, 1, 0);
}

nn::ParameterList<float> PatchDiscriminator::parameters(const std::string& p) const {
  return {{p + "conv1.weight", w1_}, {p + "conv1.bias", b1_}, {p + "conv2.weight", w2_},
          {p + "conv2.bias", b2_},   {p + "conv3.weight", w3_}, {p + "conv3.bias", b3_}};
}

class Disentangler::Codec final : public StyleCodec {
 public:
  /// Holds a copy of the generator; copies share parameter storage, so the
  /// codec stays valid when the owning Disentangler moves.
  Codec(const DisentangleConfig& cfg, const DomainGenerator& gen, std::string id)
      : cfg_(cfg), gen_(gen), id_(std::move(id)) {}

  int style_dim() const override { return cfg_.style_dim; }
  std::string encoder_id() const override { return id_; }

  Eigen::VectorXf encode_content(const Image& image) const override {
    nn::NoGradGuard ng;
    return gen_.content(input(image)).value().data;
  }
  Eigen::VectorXd encode_style(const Image& image) const override {
    nn::NoGradGuard ng;
    return gen_.style(input(image)).value().data.cast<double>();
  }
  Image decode(const Eigen::VectorXf& content, const Eigen::VectorXd& style) const override {
    const Index r = cfg_.resolution;
    const Shape cs{1, 2 * cfg_.base_channels, r / 4, r / 4};
    if (content.size() != cs.count()) throw ShapeError("content code has the wrong size");
    if (style.size() != style_dim()) throw DimensionMismatch("style vector length differs from d");
    nn::NoGradGuard ng;
    Var<float> c(Tensor<float>(cs, content));
    Var<float> s(Tensor<float>(Shape{1, style_dim(), 1, 1}, style.cast<float>()));
    return from_tensor(gen_.decode(c, s).value(), 0);
  }

 private:
  Var<float> input(const Image& image) const {
    const Index r = cfg_.resolution;
    if (image.height() != r || image.width() != r)
      throw ShapeError("style model expects " + std::to_string(r) + "x" + std::to_string(r) + " images");
    return Var<float>(to_tensor<float>(std::span<const Image>(&image, 1)));
  }
  DisentangleConfig cfg_;
  DomainGenerator gen_;
  std::string id_;
};

Disentangler::Disentangler(const DisentangleConfig& cfg, std::string id)
    : cfg_(cfg),
      id_(std::move(id)),
      init_rng_(cfg.seed),
      gen_a_(cfg, init_rng_),
      gen_p_(cfg, init_rng_),
      dis_a_(cfg, init_rng_),
      dis_p_(cfg, init_rng_) {
  cfg_.validate();
  build_optimizers();
  codec_a_ = std::make_shared<Codec>(cfg_, gen_a_, id_ + ":A");
  codec_p_ = std::make_shared<Codec>(cfg_, gen_p_, id_ + ":P");
}

void Disentangler::build_optimizers() {
  nn::AdamConfig a{cfg_.learning_rate, cfg_.beta1, cfg_.beta2, 1e-8};
  gen_opt_ = std::make_unique<nn::Adam<float>>(generator_parameters(), a);
  dis_opt_ = std::make_unique<nn::Adam<float>>(discriminator_parameters(), a);
}

nn::ParameterList<float> Disentangler::generator_parameters() const {
  auto a = gen_a_.parameters("gen_a.");
  auto p = gen_p_.parameters("gen_p.");
  a.insert(a.end(), p.begin(), p.end());
  return a;
}

nn::ParameterList<float> Disentangler::discriminator_parameters() const {
  auto a = dis_a_.parameters("dis_a.");
  auto p = dis_p_.parameters("dis_p.");
  a.insert(a.end(), p.begin(), p.end());
  return a;
}

const StyleCodec& Disentangler::codec(Domain d) const { return d == Domain::a ? *codec_a_ : *codec_p_; }

DisentangleLosses Disentangler::step(std::span<const Image> batch_a, std::span<const Image> batch_p,
                                     std::mt19937_64& rng) {
  if (batch_a.empty() || batch_p.empty()) throw DataError("style training batch is empty");
  Var<float> xa(to_tensor<float>(batch_a)), xp(to_tensor<float>(batch_p));
  if (xa.shape().h != cfg_.resolution || xp.shape().h != cfg_.resolution)
    throw ShapeError("style training images must be at the model resolution");
  std::normal_distribution<float> normal(0.0f, 1.0f);
  auto prior = [&](Index n) {
    Tensor<float> t(Shape{n, cfg_.style_dim, 1, 1});
    for (Index i = 0; i < t.size(); ++i) t.data[i] = normal(rng);
    return Var<float>(t);
  };
  const Var<float> sa_rand = prior(xa.shape().n), sp_rand = prior(xp.shape().n);

  DisentangleLosses L;
  auto ca = gen_a_.content(xa), cp = gen_p_.content(xp);
  auto sa = gen_a_.style(xa), sp = gen_p_.style(xp);
  auto recon_a = nn::l1_loss(gen_a_.decode(ca, sa), xa);
  auto recon_p = nn::l1_loss(gen_p_.decode(cp, sp), xp);
  auto x_ap = gen_p_.decode(ca, sp_rand);
  auto x_pa = gen_a_.decode(cp, sa_rand);
  auto content_a = nn::l1_loss(gen_p_.content(x_ap), ca);
  auto content_p = nn::l1_loss(gen_a_.content(x_pa), cp);
  auto gan = nn::add(nn::mse_to_constant(dis_p_(x_ap), 1.0f), nn::mse_to_constant(dis_a_(x_pa), 1.0f));
  auto total = nn::add(nn::add(nn::scale(nn::add(recon_a, recon_p), static_cast<float>(cfg_.w_image)),
                               nn::scale(nn::add(content_a, content_p), static_cast<float>(cfg_.w_content))),
                       nn::scale(gan, static_cast<float>(cfg_.w_gan)));
  if (cfg_.w_style > 0.0) {
    auto style_a = nn::l1_loss(gen_a_.style(x_pa), sa_rand);
    auto style_p = nn::l1_loss(gen_p_.style(x_ap), sp_rand);
    L.style_a = style_a.item();
    L.style_p = style_p.item();
    total = nn::add(total, nn::scale(nn::add(style_a, style_p), static_cast<float>(cfg_.w_style)));
  }
  L.recon_a = recon_a.item();
  L.recon_p = recon_p.item();
  L.content_a = content_a.item();
  L.content_p = content_p.item();
  L.gen_gan = gan.item();
  L.total_gen = total.item();

  gen_opt_->zero_grad();
  dis_opt_->zero_grad();
  nn::backward(total);
  gen_opt_->step();

  dis_opt_->zero_grad();
  auto dis = nn::add(nn::add(nn::mse_to_constant(dis_a_(xa), 1.0f), nn::mse_to_constant(dis_a_(x_pa.detach()), 0.0f)),
                     nn::add(nn::mse_to_constant(dis_p_(xp), 1.0f), nn::mse_to_constant(dis_p_(x_ap.detach()), 0.0f)));
  L.dis_gan = dis.item();
  nn::backward(dis);
  dis_opt_->step();
  log_.push_back(L);
  return L;
}

void Disentangler::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json h;
  h["format_version"] = nn::CheckpointFile::kFormatVersion;
  h["kind"] = "disentangler";
  h["id"] = id_;
  h["config"] = nlohmann::ordered_json::parse(cfg_.to_json());
  h["seed"] = cfg_.seed;
  h["scalar"] = "float32";
  nlohmann::json log = nlohmann::json::array();
  for (const auto& l : log_)
    log.push_back({l.recon_a, l.recon_p, l.content_a, l.content_p, l.style_a, l.style_p, l.gen_gan, l.dis_gan,
                   l.total_gen});
  h["log_columns"] = {"recon_a", "recon_p", "content_a", "content_p", "style_a", "style_p", "gen_gan", "dis_gan",
                      "total_gen"};
  h["log"] = log;
  nn::CheckpointFile f;
  f.header_json = h.dump();
  for (const auto& p : generator_parameters()) f.blocks.emplace_back(p.name, p.var.value().cast<double>());
  for (const auto& p : discriminator_parameters()) f.blocks.emplace_back(p.name, p.var.value().cast<double>());
  nn::write_checkpoint(path, f);
}

Disentangler Disentangler::load(const std::filesystem::path& path) {
  const auto f = nn::read_checkpoint(path);
  auto h = nlohmann::json::parse(f.header_json);
  if (h.value("kind", "") != "disentangler") throw ValidationError(path.string() + " is not a style model");
  Disentangler d(DisentangleConfig::from_json(h.at("config").dump()), h.value("id", "style"));
  auto copy = [&](const nn::ParameterList<float>& params) {
    for (auto p : params) {
      const auto* b = f.find(p.name);
      if (!b || !(b->shape == p.var.shape())) throw ValidationError("style model block '" + p.name + "' missing or misshapen");
      p.var.mutable_value().data = b->data.cast<float>();
    }
  };
  copy(d.generator_parameters());
  copy(d.discriminator_parameters());
  for (const auto& row : h.value("log", nlohmann::json::array())) {
    DisentangleLosses l;
    l.recon_a = row[0];
    l.recon_p = row[1];
    l.content_a = row[2];
    l.content_p = row[3];
    l.style_a = row[4];
    l.style_p = row[5];
    l.gen_gan = row[6];
    l.dis_gan = row[7];
    l.total_gen = row[8];
    d.log_.push_back(l);
  }
  return d;
}

std::vector<Image> to_style_resolution(std::span<const Image> images, Index resolution) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& im : images)
    out.push_back(im.height() == resolution && im.width() == resolution ? im
                                                                        : resize_bilinear(im, resolution, resolution));
  return out;
}

Disentangler train_disentangler(std::span<const Image> set_a, std::span<const Image> set_p,
                                const DisentangleConfig& cfg, std::string id) {
  if (set_a.empty() || set_p.empty()) throw DataError("style training needs non-empty sets");
  const auto a = to_style_resolution(set_a, cfg.resolution);
  const auto p = to_style_resolution(set_p, cfg.resolution);
  Disentangler model(cfg, std::move(id));
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1), pick_p(0, p.size() - 1);
  std::vector<Image> ba, bp;
  for (int s = 0; s < cfg.steps; ++s) {
    ba.clear();
    bp.clear();
    for (int i = 0; i < cfg.batch_size; ++i) {
      ba.push_back(a[pick_a(rng)]);
      bp.push_back(p[pick_p(rng)]);
    }
    model.step(ba, bp, rng);
  }
  return model;
}

RStyleResult r_style(std::span<const Image> set_a, std::span<const Image> set_p, const DisentangleConfig& cfg) {
  if (set_a.empty() || set_p.empty()) throw DataError("r_style needs non-empty sets");
  std::vector<Image> mixed(set_a.begin(), set_a.end());
  mixed.insert(mixed.end(), set_p.begin(), set_p.end());
  const auto a = to_style_resolution(set_a, cfg.resolution);
  const auto m = to_style_resolution(mixed, cfg.resolution);
  auto model_a = train_disentangler(a, set_p, cfg, "A");
  auto model_m = train_disentangler(m, set_p, cfg, "M");
  RStyleResult r;
  r.iob_a = mean_iob(a, model_a.codec(Disentangler::Domain::a));
  r.iob_m = mean_iob(m, model_m.codec(Disentangler::Domain::a));
  r.r_style = r.iob_m / r.iob_a;
  return r;
}

}  // namespace realism::styledist
