#include "realism/fusionnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "realism/error.hpp"
#include "realism/nn/checkpoint.hpp"

namespace realism::fusionnet {

void PseudoLabelConfig::validate() const {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("pseudo-label threshold must be in (0, 1]");
  if (!std::isfinite(unlabeled_loss_weight) || unlabeled_loss_weight < 0.0)
    throw InvalidArgument("unlabeled loss weight must be finite and non-negative");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (epochs < 0 || steps < 0) throw InvalidArgument("epochs and steps must be non-negative");
}

std::optional<int> pseudo_label(std::span<const double> probs, const PseudoLabelConfig& cfg) {
  if (probs.empty()) return std::nullopt;
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[i] > probs[best]) best = i;
  if (probs[best] > cfg.threshold) return best;
  return std::nullopt;
}

std::vector<double> TrainLog::totals() const {
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.loss.total);
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Cycles through a shuffled permutation, reshuffling at each wrap.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count && !order_.empty(); ++i) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64& rng_;
};

template <typename Scalar>
std::vector<Sample> gather(std::span<const Sample> all, const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

nlohmann::json loss_json(const StepLoss& l) {
  return {{"total", l.total}, {"supervised", l.supervised}, {"unsupervised", l.unsupervised},
          {"n_unlabeled", l.n_unlabeled}, {"n_confident", l.n_confident}};
}

}  // namespace

std::mt19937_64 augmentation_rng(std::uint64_t step_seed, std::uint64_t key, int view) {
  return std::mt19937_64(splitmix64(splitmix64(step_seed) ^ splitmix64(key * 4 + static_cast<std::uint64_t>(view))));
}

template <typename Scalar>
Trainer<Scalar>::Trainer(const ModelSpec& spec, std::shared_ptr<const EdgeBackend> backend, const TrainConfig& cfg)
    : cfg_(cfg),
      backend_(std::move(backend)),
      model_(spec, cfg.seed),
      opt_(model_.parameters(), nn::AdamConfig{cfg.learning_rate}) {
  cfg_.validate();
  if (spec.any_fusion() && !backend_) throw InvalidArgument("fusion model needs an edge backend");
}

template <typename Scalar>
StepLoss compute_step_loss(Trainer<Scalar>& t, std::span<const Sample> labeled, std::span<const Sample> unlabeled,
                           const PseudoLabelConfig& cfg, std::uint64_t step_seed, bool backprop) {
  if (labeled.empty()) throw EmptyBatch("labeled batch is empty");
  cfg.validate();
  auto& model = t.model();
  StepLoss out;

  std::vector<Image> weak;
  std::vector<int> labels;
  for (const auto& s : labeled) {
    auto rng = augmentation_rng(step_seed, s.key, 0);
    weak.push_back(weak_augment(*s.image, rng));
    labels.push_back(s.label);
  }
  nn::Var<Scalar> supervised =
      nn::softmax_cross_entropy(model.logits(t.input(weak), true), std::span<const int>(labels));
  nn::Var<Scalar> total = supervised;
  out.supervised = static_cast<double>(supervised.item());
  out.n_unlabeled = static_cast<int>(unlabeled.size());

  if (!unlabeled.empty() && cfg.unlabeled_loss_weight > 0.0) {
    std::vector<Image> uweak;
    for (const auto& s : unlabeled) {
      auto rng = augmentation_rng(step_seed, s.key, 1);
      uweak.push_back(weak_augment(*s.image, rng));
    }
    Tensor<Scalar> probs;
    {
      nn::NoGradGuard no_grad;
      probs = model.forward(t.input(uweak), false).value();
    }
    const Index k = probs.shape.per_sample();
    std::vector<Image> strong;
    std::vector<int> pseudo;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      std::vector<double> row(k);
      for (Index j = 0; j < k; ++j) row[j] = static_cast<double>(probs.data[static_cast<Index>(i) * k + j]);
      if (auto c = pseudo_label(row, cfg)) {
        auto rng = augmentation_rng(step_seed, unlabeled[i].key, 2);
        strong.push_back(strong_augment(*unlabeled[i].image, rng));
        pseudo.push_back(*c);
      }
    }
    out.n_confident = static_cast<int>(pseudo.size());
    if (!pseudo.empty()) {
      auto unsup = nn::softmax_cross_entropy(model.logits(t.input(strong), true), std::span<const int>(pseudo));
      out.unsupervised = static_cast<double>(unsup.item());
      total = nn::add(supervised, nn::scale(unsup, static_cast<Scalar>(cfg.unlabeled_loss_weight)));
    }
  }
  out.total = static_cast<double>(total.item());
  if (backprop) nn::backward(total);
  return out;
}

template <typename Scalar>
StepLoss semi_supervised_step(Trainer<Scalar>& t, std::span<const Sample> labeled, std::span<const Sample> unlabeled,
                              const PseudoLabelConfig& cfg, std::uint64_t step_seed) {
  t.optimizer().zero_grad();
  StepLoss loss = compute_step_loss(t, labeled, unlabeled, cfg, step_seed, true);
  t.optimizer().step();
  return loss;
}

template <typename Scalar>
TrainLog train(Trainer<Scalar>& t, std::span<const Sample> labeled, std::span<const Sample> unlabeled,
               const std::optional<SemiConfig>& semi) {
  if (labeled.empty()) throw DataError("no labeled training examples");
  const auto& cfg = t.config();
  for (const auto& s : labeled)
    if (s.label < 0 || s.label >= t.model().spec().n_classes) throw DataError("training label out of range");
  std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5eedULL));
  TrainLog log;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  BatchCycler lab(labeled.size(), rng);
  std::uint64_t global_step = 0;
  auto step_seed = [&] { return splitmix64(cfg.seed * 0x100000001b3ULL + global_step); };

  const long warmup = cfg.steps > 0 ? cfg.steps
                                    : static_cast<long>(cfg.epochs) *
                                          static_cast<long>((labeled.size() + bs - 1) / bs);
  for (long s = 0; s < warmup; ++s) {
    auto batch = gather<Scalar>(labeled, lab.next(std::min(bs, labeled.size())));
    auto loss = supervised_step(t, batch, step_seed());
    log.entries.push_back({"warmup", 0, static_cast<int>(s), loss});
    ++global_step;
  }

  if (semi && !unlabeled.empty()) {
    semi->pseudo.validate();
    const std::size_t ubs = semi->unlabeled_batch_size > 0 ? static_cast<std::size_t>(semi->unlabeled_batch_size) : bs;
    BatchCycler unl(unlabeled.size(), rng);
    const long per_round = semi->steps_per_round > 0
                               ? semi->steps_per_round
                               : static_cast<long>(semi->epochs_per_round) *
                                     static_cast<long>((unlabeled.size() + ubs - 1) / ubs);
    for (int r = 0; r < semi->rounds; ++r) {
      for (long s = 0; s < per_round; ++s) {
        auto lb = gather<Scalar>(labeled, lab.next(std::min(bs, labeled.size())));
        auto ub = gather<Scalar>(unlabeled, unl.next(std::min(ubs, unlabeled.size())));
        auto loss = semi_supervised_step(t, lb, ub, semi->pseudo, step_seed());
        log.entries.push_back({"semi", r + 1, static_cast<int>(s), loss});
        ++global_step;
      }
    }
  }
  return log;
}

template <typename Scalar>
Tensor<double> predict(FusionNet<Scalar>& model, const EdgeBackend* backend, std::span<const Image> images,
                       int batch_size) {
  if (images.empty()) throw EmptyBatch("no images to classify");
  nn::NoGradGuard no_grad;
  const Index k = model.spec().n_classes;
  Tensor<double> out(Shape{static_cast<Index>(images.size()), k, 1, 1});
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch_size), images.size() - start);
    auto in = make_input<Scalar>(model.spec(), images.subspan(start, n), backend);
    auto p = model.forward(in, false).value();
    out.data.segment(static_cast<Index>(start) * k, static_cast<Index>(n) * k) = p.data.template cast<double>();
  }
  return out;
}

namespace {

nlohmann::json log_json(const TrainLog& log) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : log.entries) {
    nlohmann::json j = loss_json(e.loss);
    j["phase"] = e.phase;
    j["round"] = e.round;
    j["step"] = e.step;
    arr.push_back(std::move(j));
  }
  return arr;
}

TrainLog log_from_json(const nlohmann::json& arr) {
  TrainLog log;
  for (const auto& j : arr) {
    LogEntry e;
    e.phase = j.value("phase", "");
    e.round = j.value("round", 0);
    e.step = j.value("step", 0);
    e.loss.total = j.value("total", 0.0);
    e.loss.supervised = j.value("supervised", 0.0);
    e.loss.unsupervised = j.value("unsupervised", 0.0);
    e.loss.n_unlabeled = j.value("n_unlabeled", 0);
    e.loss.n_confident = j.value("n_confident", 0);
    log.entries.push_back(e);
  }
  return log;
}

template <typename Scalar>
constexpr const char* scalar_name() {
  return sizeof(Scalar) == 8 ? "float64" : "float32";
}

nlohmann::json read_header(const nn::CheckpointFile& f, const std::filesystem::path& path) {
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(f.header_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint header of " + path.string() + ": " + e.what());
  }
  if (h.value("kind", "") != "fusionnet") throw ValidationError(path.string() + " is not a classifier checkpoint");
  return h;
}

}  // namespace

template <typename Scalar>
void save_classifier(const std::filesystem::path& path, const FusionNet<Scalar>& model, const CheckpointMeta& meta) {
  nlohmann::ordered_json h;
  h["format_version"] = nn::CheckpointFile::kFormatVersion;
  h["kind"] = "fusionnet";
  h["spec"] = nlohmann::ordered_json::parse(model.spec().to_json());
  h["seed"] = meta.seed;
  h["scalar"] = scalar_name<Scalar>();
  h["edge_backend"] = meta.edge_backend;
  h["extra"] = nlohmann::ordered_json::parse(meta.extra_json);
  h["log"] = log_json(meta.log);
  nn::CheckpointFile f;
  f.header_json = h.dump();
  for (const auto& [name, t] : model.state()) f.blocks.emplace_back(name, t->template cast<double>());
  nn::write_checkpoint(path, f);
}

template <typename Scalar>
CheckpointMeta load_classifier(const std::filesystem::path& path, FusionNet<Scalar>& model) {
  const auto f = nn::read_checkpoint(path);
  const auto h = read_header(f, path);
  const ModelSpec stored = ModelSpec::from_json(h.at("spec").dump());
  if (!(stored == model.spec()))
    throw ValidationError("checkpoint spec " + stored.to_json() + " does not match model spec " + model.spec().to_json());
  for (auto& [name, t] : model.state()) {
    const auto* b = f.find(name);
    if (!b) throw ValidationError("checkpoint lacks block '" + name + "'");
    if (!(b->shape == t->shape)) throw ValidationError("block '" + name + "' has shape " + b->shape.str());
    t->data = b->data.template cast<Scalar>();
  }
  CheckpointMeta meta;
  meta.seed = h.value("seed", std::uint64_t{0});
  meta.edge_backend = h.value("edge_backend", "");
  meta.extra_json = h.contains("extra") ? h.at("extra").dump() : "{}";
  if (h.contains("log")) meta.log = log_from_json(h.at("log"));
  return meta;
}

ModelSpec read_classifier_spec(const std::filesystem::path& path) {
  const auto f = nn::read_checkpoint(path);
  return ModelSpec::from_json(read_header(f, path).at("spec").dump());
}

#define REALISM_INSTANTIATE_TRAIN(S)                                                                             \
  template class Trainer<S>;                                                                                     \
  template StepLoss compute_step_loss<S>(Trainer<S>&, std::span<const Sample>, std::span<const Sample>,          \
                                         const PseudoLabelConfig&, std::uint64_t, bool);                         \
  template StepLoss semi_supervised_step<S>(Trainer<S>&, std::span<const Sample>, std::span<const Sample>,       \
                                            const PseudoLabelConfig&, std::uint64_t);                            \
  template TrainLog train<S>(Trainer<S>&, std::span<const Sample>, std::span<const Sample>,                      \
                             const std::optional<SemiConfig>&);                                                  \
  template Tensor<double> predict<S>(FusionNet<S>&, const EdgeBackend*, std::span<const Image>, int);            \
  template void save_classifier<S>(const std::filesystem::path&, const FusionNet<S>&, const CheckpointMeta&);    \
  template CheckpointMeta load_classifier<S>(const std::filesystem::path&, FusionNet<S>&);

REALISM_INSTANTIATE_TRAIN(float)
REALISM_INSTANTIATE_TRAIN(double)

}  // namespace realism::fusionnet
