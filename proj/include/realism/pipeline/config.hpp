#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "realism/fusionnet/model.hpp"
#include "realism/fusionnet/train.hpp"
#include "realism/stats/tests.hpp"
#include "realism/styledist/disentangler.hpp"

namespace realism::pipeline {

/// One classifier configuration of the ablation table.
struct Variant {
  std::string name;
  bool fusion = true;
  bool semi = true;
  bool sky_selection = true;
};

/// "full", "no-fusion", "no-semi" or "no-sky-selection".
Variant parse_variant(const std::string& name);

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  /// Ground-truth sky masks as <id>.png; empty when unavailable.
  std::filesystem::path masks_dir;
  /// Fitted sky classifier JSON; empty selects the built-in fixture-trained one.
  std::filesystem::path sky_model;
  std::string edge_backend = "fixed";
  std::filesystem::path hed_checkpoint;
  /// Derives the training, style and subset seeds.
  std::uint64_t seed = 0;

  int segments = 48;
  int seed_block = 8;

  fusionnet::ModelSpec model = fusionnet::ModelSpec::paper_default();
  fusionnet::TrainConfig train;
  fusionnet::SemiConfig semi;
  std::vector<std::string> variants{"full", "no-fusion", "no-semi", "no-sky-selection"};

  bool run_style = true;
  styledist::DisentangleConfig style;
  /// Photos (manifest order) forming the style reference set.
  int photo_reference = 300;
  /// Artist every comparison is made against; empty means the first artist.
  std::string reference_artist;

  stats::SubsetPlan subsets;
  double alpha = 0.05;
  stats::TVariant t_variant = stats::TVariant::welch;

  void validate() const;
  std::string to_json() const;
  /// Relative paths resolve against base_dir.
  static RunConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Desk-scale settings for the bundled synthetic corpus.
  static RunConfig fixture(const std::filesystem::path& manifest, const std::filesystem::path& masks_dir,
                           const std::filesystem::path& output_dir);
};

}  // namespace realism::pipeline
