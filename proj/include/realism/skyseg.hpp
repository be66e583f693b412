#pragma once

#include <Eigen/Core>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "realism/image.hpp"

namespace realism {

/// Integer patch labelling aligned pixelwise to its source image.
/// Every label in [0, n_segments) occurs, and each label is one 4-connected region.
struct SegmentMap {
  Eigen::ArrayXXi labels;
  int n_segments = 0;

  Index height() const { return labels.rows(); }
  Index width() const { return labels.cols(); }
};

struct A3CConfig {
  /// Side of the square seed blocks the agglomeration starts from. When the
  /// image has fewer blocks than the target, the side is halved until it does.
  int seed_block = 8;
};

/// One greedy merge: labels are the pre-merge region ids (the survivor is `kept`).
struct MergeStep {
  int kept = 0;
  int absorbed = 0;
  double cost = 0.0;            // Ward increase in within-segment sum of squares
  double total_variance = 0.0;  // total within-segment SSE after the merge
  bool adjacent = false;        // the two regions shared a 4-connected boundary
};

/// Agglomerative connectivity-constrained clustering: start from seed blocks,
/// repeatedly merge the adjacent pair with minimal Ward cost; ties go to the
/// lexicographically smallest (label_a, label_b). Output labels are renumbered
/// by first appearance in raster order.
SegmentMap a3c_cluster(const Image& image, int target_segments, const A3CConfig& config = {},
                       std::vector<MergeStep>* merge_log = nullptr);

/// Total within-segment RGB sum of squared deviations.
double within_segment_sse(const Image& image, const SegmentMap& seg);

using SegmentFeatures = Eigen::Matrix<double, 10, 1>;

/// Per segment: mean RGB, std RGB, centroid row/col fraction, topmost-row
/// fraction, area fraction.
std::vector<SegmentFeatures> segment_features(const Image& image, const SegmentMap& seg);

/// Check that a SegmentMap satisfies its invariants; throws ShapeMismatch / InvalidArgument.
void check_segment_map(const SegmentMap& seg);

struct LabeledSegment {
  SegmentFeatures features;
  bool sky = false;
};

/// Logistic regression on segment features, fitted by Newton's method on an
/// L2-regularized log-likelihood over standardized inputs.
class SkyClassifier {
 public:
  struct Options {
    double l2 = 1e-3;
    int max_iterations = 100;
    double tolerance = 1e-10;
  };

  SkyClassifier() = default;
  SkyClassifier(Eigen::Matrix<double, 10, 1> weights, double bias)
      : weights_(std::move(weights)), bias_(bias), trained_(true) {}

  static SkyClassifier fit(std::span<const LabeledSegment> data, const Options& options);
  static SkyClassifier fit(std::span<const LabeledSegment> data) { return fit(data, Options{}); }

  double probability(const SegmentFeatures& f) const;
  bool is_sky(const SegmentFeatures& f) const { return probability(f) > 0.5; }
  bool trained() const { return trained_; }

  /// Weights and bias in raw feature space.
  const Eigen::Matrix<double, 10, 1>& weights() const { return weights_; }
  double bias() const { return bias_; }
  int iterations() const { return iterations_; }

  std::string to_json() const;
  static SkyClassifier from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static SkyClassifier load(const std::filesystem::path& path);

 private:
  Eigen::Matrix<double, 10, 1> weights_ = Eigen::Matrix<double, 10, 1>::Zero();
  double bias_ = 0.0;
  bool trained_ = false;
  int iterations_ = 0;
};

/// A segment is sky when more than half its pixels are sky in `truth`.
std::vector<LabeledSegment> label_segments(const Image& image, const SegmentMap& seg, const MaskGrid& truth);

MaskGrid predict_sky_mask(const Image& image, const SegmentMap& seg, const SkyClassifier& clf);

struct SkySelectedImage {
  Image pixels;
  std::string provenance;
};

inline constexpr Index kModelResolution = 400;

/// Resizes image (bilinear) and mask (nearest) to out_size, then zeroes every
/// pixel outside the resampled mask.
SkySelectedImage apply_sky_selection(const Image& image, const MaskGrid& mask, Index out_height = kModelResolution,
                                     Index out_width = kModelResolution, std::string provenance = {});

struct SegMetrics {
  double pixel_accuracy = 0.0;
  double mean_accuracy = 0.0;
  double mean_iou = 0.0;
};

/// Mean accuracy averages per-class recall over classes present in the ground
/// truth; mean IoU averages over classes present in either mask.
SegMetrics seg_metrics(const MaskGrid& pred, const MaskGrid& gt);

struct SkySegmenter {
  int target_segments = 48;
  A3CConfig a3c;
  SkyClassifier classifier;

  MaskGrid segment(const Image& image) const {
    int target = static_cast<int>(std::min<Index>(target_segments, image.pixels()));
    return predict_sky_mask(image, a3c_cluster(image, std::max(2, target), a3c), classifier);
  }
};

/// Fits a classifier on segments of annotated images.
SkyClassifier fit_sky_classifier(std::span<const Image> images, std::span<const MaskGrid> masks,
                                 int target_segments = 48, const A3CConfig& a3c = {});

}  // namespace realism
