#include "realism/corpus.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "realism/error.hpp"
#include "realism/image.hpp"

namespace realism {

namespace {

constexpr std::array<std::string_view, kNumGenera> kGenusNames = {
    "cirrus",      "cirrostratus", "cirrocumulus", "altocumulus",   "altostratus",
    "cumulus",     "cumulonimbus", "nimbostratus", "stratocumulus", "stratus",
};
constexpr std::array<std::string_view, kNumForms> kFormNames = {
    "cumuliform", "cumulonimbiform", "cirriform", "stratiform", "stratocumuliform",
};
constexpr std::array<std::string_view, kNumForms> kFormAbbrev = {"Cu", "Cb", "Cs", "St", "Sc"};

const std::set<std::string> kRecordKeys = {"id",     "image_path", "source", "artist",   "year",
                                           "label10", "label5",     "split",  "annotator"};

template <std::size_t N>
int find_name(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<int>(i);
  return -1;
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  if (!it->is_string()) throw ParseError(where + ": key '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return std::nullopt;
  if (!it->is_string()) throw ParseError(where + ": key '" + std::string(key) + "' must be a string");
  return it->get<std::string>();
}

CorpusRecord parse_record(const nlohmann::json& obj, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!kRecordKeys.contains(it.key())) throw ParseError(where + ": unknown key '" + it.key() + "'");

  CorpusRecord r;
  r.id = require_string(obj, "id", where);
  const std::string ctx = where + " (record '" + r.id + "')";
  r.image_path = require_string(obj, "image_path", ctx);
  r.source = parse_source(require_string(obj, "source", ctx));
  r.split = parse_split(require_string(obj, "split", ctx));
  r.artist = optional_string(obj, "artist", ctx);
  r.annotator = optional_string(obj, "annotator", ctx);
  if (auto it = obj.find("year"); it != obj.end()) {
    if (!it->is_number_integer()) throw ParseError(ctx + ": key 'year' must be an integer");
    r.year = it->get<int>();
  }
  try {
    if (auto s = optional_string(obj, "label10", ctx)) r.label10 = parse_label(*s);
    if (auto s = optional_string(obj, "label5", ctx)) r.label5 = parse_form(*s);
  } catch (const ParseError& e) {
    throw ParseError(ctx + ": " + e.what());
  }
  return r;
}

nlohmann::ordered_json record_json(const CorpusRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["image_path"] = r.image_path.generic_string();
  j["source"] = to_string(r.source);
  if (r.artist) j["artist"] = *r.artist;
  if (r.year) j["year"] = *r.year;
  if (r.label10) j["label10"] = to_string(*r.label10);
  if (r.label5) j["label5"] = to_string(*r.label5);
  j["split"] = to_string(r.split);
  if (r.annotator) j["annotator"] = *r.annotator;
  return j;
}

}  // namespace

std::string_view to_string(CloudLabel label) { return kGenusNames[index_of(label)]; }
std::string_view to_string(CloudForm form) { return kFormNames[index_of(form)]; }
std::string_view abbreviation(CloudForm form) { return kFormAbbrev[index_of(form)]; }
std::string_view to_string(Source source) { return source == Source::painting ? "painting" : "photo"; }
std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::test:
      return "test";
    case Split::unlabeled:
      return "unlabeled";
  }
  return "";
}

CloudLabel parse_label(std::string_view s) {
  int i = find_name(kGenusNames, s);
  if (i < 0) throw ParseError("unknown cloud genus '" + std::string(s) + "'");
  return label_from_index(i);
}

CloudForm parse_form(std::string_view s) {
  int i = find_name(kFormNames, s);
  if (i < 0) throw ParseError("unknown cloud form '" + std::string(s) + "'");
  return form_from_index(i);
}

Source parse_source(std::string_view s) {
  if (s == "painting") return Source::painting;
  if (s == "photo") return Source::photo;
  throw ParseError("unknown source '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "unlabeled") return Split::unlabeled;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

const CorpusRecord* Manifest::find(std::string_view id) const {
  for (const auto& r : records)
    if (r.id == id) return &r;
  return nullptr;
}

std::vector<std::string> Manifest::artists() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (r.source != Source::painting || !r.artist) continue;
    if (std::find(out.begin(), out.end(), *r.artist) == out.end()) out.push_back(*r.artist);
  }
  return out;
}

void validate_record(const CorpusRecord& r) {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw ValidationError("record '" + r.id + "' field '" + field + "': " + why);
  };
  if (r.id.empty()) fail("id", "must be non-empty");
  if (r.image_path.empty()) fail("image_path", "must be non-empty");
  if (r.split == Split::unlabeled && r.labeled())
    fail(r.label10 ? "label10" : "label5", "unlabeled records must not carry labels");
  if (r.split != Split::unlabeled && !r.labeled()) fail("split", "train/test records need a label");
  if (r.label10 && r.label5 && map_to_form(*r.label10) != *r.label5)
    fail("label5", "'" + std::string(to_string(*r.label5)) + "' does not match label10 '" +
                       std::string(to_string(*r.label10)) + "' (expected '" +
                       std::string(to_string(map_to_form(*r.label10))) + "')");
  if (r.source == Source::painting && (!r.artist || r.artist->empty()))
    fail("artist", "paintings require an artist");
}

void validate_manifest(const Manifest& m, const std::filesystem::path& base_dir, const ManifestOptions& options) {
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    validate_record(r);
    if (!seen.insert(r.id).second) throw ValidationError("record '" + r.id + "' field 'id': duplicate id");
    if (options.check_images) {
      try {
        (void)load_image(resolve_image_path(r, base_dir));
      } catch (const IoError& e) {
        throw ValidationError("record '" + r.id + "' field 'image_path': " + e.what());
      }
    }
  }
}

std::filesystem::path resolve_image_path(const CorpusRecord& record, const std::filesystem::path& base_dir) {
  if (record.image_path.is_absolute() || base_dir.empty()) return record.image_path;
  return base_dir / record.image_path;
}

Manifest parse_manifest(std::string_view text) {
  Manifest m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!header_seen) {
      if (!obj.is_object() || obj.size() != 1 || !obj.contains("schema_version") ||
          !obj["schema_version"].is_number_integer())
        throw ParseError(where + ": expected header {\"schema_version\": 1}");
      m.schema_version = obj["schema_version"].get<int>();
      if (m.schema_version != 1)
        throw ParseError(where + ": unsupported schema_version " + std::to_string(m.schema_version));
      header_seen = true;
      continue;
    }
    m.records.push_back(parse_record(obj, where));
  }
  if (!header_seen) throw ParseError("manifest is empty (missing header line)");
  return m;
}

std::string serialize_manifest(const Manifest& m) {
  std::string out = nlohmann::ordered_json{{"schema_version", m.schema_version}}.dump() + "\n";
  for (const auto& r : m.records) out += record_json(r).dump() + "\n";
  return out;
}

Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  Manifest m = parse_manifest(buf.str());
  validate_manifest(m, path.parent_path(), options);
  return m;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << serialize_manifest(m);
}

std::map<SplitKey, std::size_t> split_counts(const Manifest& m) {
  std::map<SplitKey, std::size_t> counts;
  for (auto source : {Source::painting, Source::photo})
    for (auto split : {Split::train, Split::test, Split::unlabeled}) counts[{source, split}] = 0;
  for (const auto& r : m.records) ++counts[{r.source, r.split}];
  return counts;
}

}  // namespace realism
