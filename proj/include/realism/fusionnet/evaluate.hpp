#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "realism/corpus.hpp"
#include "realism/tensor.hpp"

namespace realism::fusionnet {

enum class Granularity { genus10, form5 };
Granularity parse_granularity(const std::string& s);  // "10" or "5"

struct EvalResult {
  double accuracy = 0.0;
  /// Macro averages over classes that occur in the ground truth; a class never
  /// predicted has precision 0.
  double precision = 0.0;
  double recall = 0.0;
  Eigen::MatrixXi confusion;  // rows = truth, cols = prediction
  std::vector<std::string> class_names;
  std::size_t n = 0;
  std::size_t correct = 0;
};

EvalResult evaluate_indices(std::span<const int> truth, std::span<const int> pred, std::vector<std::string> class_names);

/// Scores 10-class predictions against labeled records. The five-form view maps
/// both the predicted genus and the truth through map_to_form.
EvalResult evaluate_records(std::span<const CorpusRecord> records, std::span<const int> pred10, Granularity g);

std::vector<std::string> genus_names();
std::vector<std::string> form_abbreviations();

struct PredictionRow {
  std::string id;
  int pred10 = 0;
  double max_posterior = 0.0;
  std::array<double, kNumGenera> posterior{};

  CloudForm pred5() const { return map_to_form(label_from_index(pred10)); }
};

/// Argmax with lowest index on ties.
int argmax_row(const Tensor<double>& probs, Index row);

std::vector<PredictionRow> prediction_rows(std::span<const std::string> ids, const Tensor<double>& probs);

/// Columns: id, pred10, pred5, max_posterior, then p_<genus> in canonical order.
void write_predictions_csv(const std::filesystem::path& path, std::span<const PredictionRow> rows);
std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path);

/// Confusion matrix as CSV with a header row of predicted class names.
std::string confusion_csv(const EvalResult& r);

}  // namespace realism::fusionnet
