#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "realism/fusionnet/augment.hpp"
#include "realism/fusionnet/model.hpp"
#include "realism/nn/optim.hpp"

namespace realism::fusionnet {

struct PseudoLabelConfig {
  double threshold = 0.95;
  double unlabeled_loss_weight = 1.0;

  void validate() const;
};

/// Argmax (lowest index on ties) when the max probability is strictly above threshold.
std::optional<int> pseudo_label(std::span<const double> probs, const PseudoLabelConfig& cfg);

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 16;
  /// Supervised warm-up length in epochs over the labeled set.
  int epochs = 10;
  /// When positive, the warm-up runs exactly this many steps instead.
  int steps = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SemiConfig {
  PseudoLabelConfig pseudo;
  /// Self-training rounds after warm-up; pseudo labels are regenerated every step
  /// from the current model, so once per epoch over the unlabeled set.
  int rounds = 1;
  int epochs_per_round = 1;
  /// When positive, each round runs exactly this many steps.
  int steps_per_round = 0;
  /// Unlabeled examples per step; 0 means the labeled batch size.
  int unlabeled_batch_size = 0;
};

/// One training example. `key` identifies the example and seeds its
/// augmentation, independent of batch composition.
struct Sample {
  const Image* image = nullptr;
  int label = -1;
  std::uint64_t key = 0;
};

struct StepLoss {
  double total = 0.0;
  double supervised = 0.0;
  double unsupervised = 0.0;
  int n_unlabeled = 0;
  int n_confident = 0;
};

/// Model, frozen edge backend and optimizer state.
template <typename Scalar>
class Trainer {
 public:
  Trainer(const ModelSpec& spec, std::shared_ptr<const EdgeBackend> backend, const TrainConfig& cfg);

  FusionNet<Scalar>& model() { return model_; }
  const FusionNet<Scalar>& model() const { return model_; }
  const EdgeBackend* backend() const { return backend_.get(); }
  std::shared_ptr<const EdgeBackend> backend_handle() const { return backend_; }
  const TrainConfig& config() const { return cfg_; }
  nn::Adam<Scalar>& optimizer() { return opt_; }

  ModelInput<Scalar> input(std::span<const Image> images) const {
    return make_input<Scalar>(model_.spec(), images, backend_.get());
  }

 private:
  TrainConfig cfg_;
  std::shared_ptr<const EdgeBackend> backend_;
  FusionNet<Scalar> model_;
  nn::Adam<Scalar> opt_;
};

/// Per-example augmentation stream derived from (step seed, example key, view).
std::mt19937_64 augmentation_rng(std::uint64_t step_seed, std::uint64_t key, int view);

/// Loss of a step without updating anything. Supervised term: CE on weak views
/// of the labeled batch (training-mode BN). Unlabeled term: pseudo labels from
/// eval-mode predictions on weak views; CE on strong views of the confident
/// examples only, averaged over them, times the loss weight. The unlabeled
/// forward is skipped when nothing is confident or the weight is zero.
/// When `backprop` is set the gradients of the total are accumulated.
template <typename Scalar>
StepLoss compute_step_loss(Trainer<Scalar>& t, std::span<const Sample> labeled, std::span<const Sample> unlabeled,
                           const PseudoLabelConfig& cfg, std::uint64_t step_seed, bool backprop);

/// compute_step_loss followed by one Adam step.
template <typename Scalar>
StepLoss semi_supervised_step(Trainer<Scalar>& t, std::span<const Sample> labeled, std::span<const Sample> unlabeled,
                              const PseudoLabelConfig& cfg, std::uint64_t step_seed);

template <typename Scalar>
StepLoss supervised_step(Trainer<Scalar>& t, std::span<const Sample> labeled, std::uint64_t step_seed) {
  return semi_supervised_step<Scalar>(t, labeled, {}, PseudoLabelConfig{}, step_seed);
}

struct LogEntry {
  std::string phase;  // "warmup" or "semi"
  int round = 0;
  int step = 0;
  StepLoss loss;
};

struct TrainLog {
  std::vector<LogEntry> entries;
  std::vector<double> totals() const;
};

/// Supervised warm-up then the configured self-training rounds.
template <typename Scalar>
TrainLog train(Trainer<Scalar>& t, std::span<const Sample> labeled, std::span<const Sample> unlabeled,
               const std::optional<SemiConfig>& semi);

/// Posterior rows for images at model resolution, eval mode, no gradients.
template <typename Scalar>
Tensor<double> predict(FusionNet<Scalar>& model, const EdgeBackend* backend, std::span<const Image> images,
                       int batch_size = 16);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string edge_backend;
  TrainLog log;
  std::string extra_json = "{}";
};

template <typename Scalar>
void save_classifier(const std::filesystem::path& path, const FusionNet<Scalar>& model, const CheckpointMeta& meta);

/// Loads the weights into `model`; throws ValidationError if the stored spec differs.
template <typename Scalar>
CheckpointMeta load_classifier(const std::filesystem::path& path, FusionNet<Scalar>& model);

/// Reads only the spec from a classifier checkpoint.
ModelSpec read_classifier_spec(const std::filesystem::path& path);

}  // namespace realism::fusionnet
