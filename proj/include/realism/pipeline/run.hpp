#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "realism/pipeline/config.hpp"

namespace realism::pipeline {

struct AccuracyCI {
  double accuracy = 0.0, lo = 0.0, hi = 0.0;
  std::size_t n = 0, correct = 0;
};

/// Fraction of matching positions with its Wald interval.
AccuracyCI accuracy_with_ci(std::span<const int> preds, std::span<const int> labels, double alpha = 0.05);

struct CacheEvent {
  std::string stage;
  std::string key;
  bool hit = false;
};

struct Report {
  std::string run_id;
  std::filesystem::path dir;
  /// Table name -> CSV path, in the order written.
  std::vector<std::pair<std::string, std::filesystem::path>> tables;
  std::vector<CacheEvent> cache_log;

  const std::filesystem::path& table(const std::string& name) const;
  std::size_t recomputed() const;
};

/// segment -> classify (one cache entry per variant) -> style (one per artist) -> stats.
/// Stage outputs live under <out>/cache/<stage>-<key>/ keyed by a SHA-256 of the
/// stage's inputs and config; tables are written to <out>/report/.
/// Module errors are rethrown as StageError naming the stage.
Report run_experiment(const RunConfig& config, std::ostream* progress = nullptr);

}  // namespace realism::pipeline
