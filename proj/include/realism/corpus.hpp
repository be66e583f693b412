#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace realism {

/// The ten cloud genera, in canonical order. This order fixes class indices,
/// posterior column order in predictions files, and confusion-matrix axes.
enum class CloudLabel : std::uint8_t {
  cirrus,
  cirrostratus,
  cirrocumulus,
  altocumulus,
  altostratus,
  cumulus,
  cumulonimbus,
  nimbostratus,
  stratocumulus,
  stratus,
};
inline constexpr int kNumGenera = 10;

enum class CloudForm : std::uint8_t {
  cumuliform,
  cumulonimbiform,
  cirriform,
  stratiform,
  stratocumuliform,
};
inline constexpr int kNumForms = 5;

enum class Source : std::uint8_t { painting, photo };
enum class Split : std::uint8_t { train, test, unlabeled };

std::string_view to_string(CloudLabel label);
std::string_view to_string(CloudForm form);
std::string_view to_string(Source source);
std::string_view to_string(Split split);

/// Two-letter abbreviations (Cu, Cb, Cs, St, Sc) used on confusion-matrix axes.
std::string_view abbreviation(CloudForm form);

/// Parsers throw ParseError on any string outside the enumeration.
CloudLabel parse_label(std::string_view s);
CloudForm parse_form(std::string_view s);
Source parse_source(std::string_view s);
Split parse_split(std::string_view s);

constexpr CloudLabel label_from_index(int i) { return static_cast<CloudLabel>(i); }
constexpr CloudForm form_from_index(int i) { return static_cast<CloudForm>(i); }
constexpr int index_of(CloudLabel l) { return static_cast<int>(l); }
constexpr int index_of(CloudForm f) { return static_cast<int>(f); }

/// Ten genera onto five forms.
constexpr CloudForm map_to_form(CloudLabel label) {
  switch (label) {
    case CloudLabel::cumulus:
      return CloudForm::cumuliform;
    case CloudLabel::cumulonimbus:
      return CloudForm::cumulonimbiform;
    case CloudLabel::cirrus:
      return CloudForm::cirriform;
    case CloudLabel::stratus:
    case CloudLabel::cirrostratus:
    case CloudLabel::altostratus:
    case CloudLabel::nimbostratus:
      return CloudForm::stratiform;
    case CloudLabel::cirrocumulus:
    case CloudLabel::altocumulus:
    case CloudLabel::stratocumulus:
      return CloudForm::stratocumuliform;
  }
  return CloudForm::stratiform;  // unreachable
}

struct CorpusRecord {
  std::string id;
  std::filesystem::path image_path;
  Source source = Source::photo;
  std::optional<std::string> artist;
  std::optional<int> year;
  std::optional<CloudLabel> label10;
  std::optional<CloudForm> label5;
  Split split = Split::train;
  std::optional<std::string> annotator;

  bool labeled() const { return label10.has_value() || label5.has_value(); }
  /// The five-form label, derived from label10 when only that is present.
  std::optional<CloudForm> form() const {
    if (label5) return label5;
    if (label10) return map_to_form(*label10);
    return std::nullopt;
  }

  bool operator==(const CorpusRecord&) const = default;
};

struct Manifest {
  int schema_version = 1;
  std::vector<CorpusRecord> records;

  std::size_t size() const { return records.size(); }
  const CorpusRecord* find(std::string_view id) const;

  /// Records matching a predicate, in manifest order.
  template <typename Pred>
  std::vector<CorpusRecord> select(Pred pred) const {
    std::vector<CorpusRecord> out;
    for (const auto& r : records)
      if (pred(r)) out.push_back(r);
    return out;
  }

  /// Distinct painting artists in first-appearance order.
  std::vector<std::string> artists() const;

  bool operator==(const Manifest&) const = default;
};

struct ManifestOptions {
  /// Open every image_path and check it decodes to a 3-channel raster.
  bool check_images = true;
};

/// Throws ValidationError naming the record id and field on any invariant violation.
void validate_record(const CorpusRecord& record);
void validate_manifest(const Manifest& manifest, const std::filesystem::path& base_dir,
                       const ManifestOptions& options);

/// Relative image paths resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Parses manifest text (header line + one JSON object per line).
Manifest parse_manifest(std::string_view text);
std::string serialize_manifest(const Manifest& manifest);

std::filesystem::path resolve_image_path(const CorpusRecord& record, const std::filesystem::path& base_dir);

using SplitKey = std::pair<Source, Split>;
/// Counts for every (source, split) pair, zeros included.
std::map<SplitKey, std::size_t> split_counts(const Manifest& manifest);

}  // namespace realism
