#include "realism/pipeline/run.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "json.hpp"
#include "realism/corpus.hpp"
#include "realism/edgefeat.hpp"
#include "realism/error.hpp"
#include "realism/fixtures.hpp"
#include "realism/format.hpp"
#include "realism/fusionnet/evaluate.hpp"
#include "realism/fusionnet/train.hpp"
#include "realism/pipeline/hash.hpp"
#include "realism/skyseg.hpp"
#include "realism/stats/tests.hpp"
#include "realism/styledist/disentangler.hpp"
#include "realism/styledist/metrics.hpp"

namespace realism::pipeline {

namespace fs = std::filesystem;

AccuracyCI accuracy_with_ci(std::span<const int> preds, std::span<const int> labels, double alpha) {
  if (preds.size() != labels.size()) throw DimensionMismatch("predictions and labels differ in length");
  if (preds.empty()) throw EmptyInput("accuracy of an empty prediction set");
  AccuracyCI r;
  r.n = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) r.correct += preds[i] == labels[i];
  r.accuracy = static_cast<double>(r.correct) / r.n;
  auto ci = stats::wald_ci(static_cast<long>(r.correct), static_cast<long>(r.n), alpha);
  r.lo = ci.lo;
  r.hi = ci.hi;
  return r;
}

const fs::path& Report::table(const std::string& name) const {
  for (const auto& [n, p] : tables)
    if (n == name) return p;
  throw InvalidArgument("report has no table '" + name + "'");
}

std::size_t Report::recomputed() const {
  return std::count_if(cache_log.begin(), cache_log.end(), [](const CacheEvent& e) { return !e.hit; });
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derived_seed(std::uint64_t seed, std::string_view purpose) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : purpose) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return splitmix(seed ^ h);
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out;
}

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

class Cache {
 public:
  Cache(fs::path root, std::vector<CacheEvent>& log, std::ostream* progress)
      : root_(std::move(root)), log_(log), progress_(progress) {}

  fs::path stage(const std::string& stage, const std::string& key, const std::function<void(const fs::path&)>& compute) {
    const fs::path dir = root_ / (stage + "-" + key.substr(0, 16));
    const bool hit = fs::exists(dir / ".complete");
    log_.push_back({stage, key, hit});
    if (progress_) *progress_ << "[" << stage << "] " << (hit ? "cache hit" : "computing") << " " << key.substr(0, 16) << "\n";
    if (hit) return dir;
    in_stage(stage, [&] {
      fs::remove_all(dir);
      fs::create_directories(dir);
      compute(dir);
      std::ofstream(dir / ".complete") << key << "\n";
    });
    return dir;
  }

 private:
  fs::path root_;
  std::vector<CacheEvent>& log_;
  std::ostream* progress_;
};

struct Corpus {
  Manifest manifest;
  fs::path base;
  std::vector<Image> images;
  std::vector<std::optional<MaskGrid>> truth;
  std::vector<fs::path> mask_paths;
  std::string hash;
};

Corpus load_corpus(const RunConfig& cfg) {
  Corpus c;
  c.manifest = load_manifest(cfg.manifest);
  c.base = cfg.manifest.parent_path();
  Hasher h;
  h.field("corpus").file(cfg.manifest);
  for (const auto& r : c.manifest.records) {
    const auto path = resolve_image_path(r, c.base);
    h.field(r.id).file(path);
    c.images.push_back(load_image(path));
    std::optional<MaskGrid> truth;
    fs::path mp;
    if (!cfg.masks_dir.empty() && fs::exists(cfg.masks_dir / (r.id + ".png"))) {
      mp = cfg.masks_dir / (r.id + ".png");
      truth = load_mask(mp);
      h.field("mask").file(mp);
    } else {
      h.field("no-mask");
    }
    c.truth.push_back(std::move(truth));
    c.mask_paths.push_back(mp);
  }
  c.hash = h.hex();
  return c;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split_csv_line(line));
  return rows;
}

std::string fx(double v) { return fmt_fixed(v, 6); }
std::string px(double v) { return fmt_sci(v, 6); }

struct StatRow {
  std::string test, entity, statistic, p_value, df1, df2, note;
};

StatRow stat_row(const std::string& test, const std::string& entity, const stats::StatResult& r) {
  return {test,
          entity,
          fx(r.statistic),
          px(r.p_value),
          r.df1 > 0 ? fx(r.df1) : "",
          r.df2 > 0 ? fx(r.df2) : "",
          r.degenerate ? "degenerate" : ""};
}

template <typename F>
StatRow guarded(const std::string& test, const std::string& entity, F&& f) {
  try {
    return stat_row(test, entity, f());
  } catch (const Error& e) {
    return {test, entity, "", "", "", "", e.kind()};
  }
}

}  // namespace

Report run_experiment(const RunConfig& config, std::ostream* progress) {
  in_stage("config", [&] { config.validate(); });
  Report report;
  const fs::path out = config.output_dir;
  report.dir = out / "report";
  Cache cache(out / "cache", report.cache_log, progress);

  const Corpus corpus = in_stage("load", [&] { return load_corpus(config); });
  const auto& records = corpus.manifest.records;
  const std::size_t n_records = records.size();

  auto config_json = nlohmann::ordered_json::parse(config.to_json());
  config_json.erase("output_dir");
  config_json.erase("manifest");
  config_json.erase("masks_dir");
  {
    Hasher h;
    report.run_id = h.field(config_json.dump()).field(corpus.hash).hex().substr(0, 16);
  }

  // segment
  Hasher seg_h;
  seg_h.field("segment").field(corpus.hash).field(std::to_string(config.segments)).field(std::to_string(config.seed_block));
  if (config.sky_model.empty())
    seg_h.field("builtin-sky");
  else
    seg_h.file(config.sky_model);
  const std::string seg_key = seg_h.hex();
  const fs::path seg_dir = cache.stage("segment", seg_key, [&](const fs::path& dir) {
    const SkyClassifier clf =
        config.sky_model.empty() ? fixtures::default_sky_classifier() : SkyClassifier::load(config.sky_model);
    SkySegmenter seg{config.segments, A3CConfig{config.seed_block}, clf};
    fs::create_directories(dir / "pred");
    auto os = open_out(dir / "metrics.csv");
    os << "id,artist,pixel_accuracy,mean_accuracy,mean_iou\n";
    for (std::size_t i = 0; i < n_records; ++i) {
      const auto& r = records[i];
      if (r.source != Source::painting && corpus.truth[i]) continue;
      const MaskGrid pred = seg.segment(corpus.images[i]);
      save_mask(pred, dir / "pred" / (r.id + ".png"));
      if (r.source == Source::painting && corpus.truth[i]) {
        const auto m = seg_metrics(pred, *corpus.truth[i]);
        os << r.id << ',' << r.artist.value_or("") << ',' << fx(m.pixel_accuracy) << ',' << fx(m.mean_accuracy) << ','
           << fx(m.mean_iou) << "\n";
      }
    }
  });
  std::vector<MaskGrid> sky(n_records);
  in_stage("segment", [&] {
    for (std::size_t i = 0; i < n_records; ++i) {
      const auto& r = records[i];
      sky[i] = r.source != Source::painting && corpus.truth[i] ? *corpus.truth[i]
                                                                : load_mask(seg_dir / "pred" / (r.id + ".png"));
    }
  });

  // classify
  const Index res_h = config.model.input_height, res_w = config.model.input_width;
  std::vector<Image> selected, plain;
  for (std::size_t i = 0; i < n_records; ++i) {
    selected.push_back(apply_sky_selection(corpus.images[i], sky[i], res_h, res_w).pixels);
    plain.push_back(resize_bilinear(corpus.images[i], res_h, res_w));
  }
  std::vector<std::size_t> train_idx, unlabeled_idx, test_idx;
  for (std::size_t i = 0; i < n_records; ++i) {
    const auto& r = records[i];
    if (r.split == Split::train && r.label10) train_idx.push_back(i);
    if (r.split == Split::unlabeled) unlabeled_idx.push_back(i);
    if (r.split == Split::test && r.label10) test_idx.push_back(i);
  }
  std::string hed_hash = "none";
  if (config.edge_backend == "hed") {
    Hasher h;
    hed_hash = h.file(config.hed_checkpoint).hex();
  }

  std::map<std::string, std::map<std::string, int>> predictions;  // variant -> id -> pred10
  for (const auto& vname : config.variants) {
    const Variant v = parse_variant(vname);
    const auto spec = v.fusion ? config.model : config.model.without_fusion();
    fusionnet::TrainConfig tc = config.train;
    tc.seed = derived_seed(config.seed, "train");
    nlohmann::ordered_json tj{{"lr", tc.learning_rate}, {"batch", tc.batch_size}, {"epochs", tc.epochs},
                              {"steps", tc.steps},      {"seed", tc.seed}};
    Hasher h;
    h.field("classify").field(seg_key).field(vname).field(spec.to_json()).field(tj.dump());
    // only inputs the variant actually reads enter its key
    h.field(v.semi ? config_json["semi"].dump() : "supervised");
    h.field(spec.any_fusion() ? config.edge_backend + ":" + hed_hash : "no-edges");
    const std::string key = h.hex();
    const std::string stage = "classify-" + vname;
    const fs::path dir = cache.stage(stage, key, [&](const fs::path& d) {
      if (train_idx.empty()) throw DataError("no labeled training records");
      if (test_idx.empty()) throw DataError("no labeled test records");
      const auto& imgs = v.sky_selection ? selected : plain;
      auto backend = v.fusion ? make_edge_backend(config.edge_backend, config.hed_checkpoint) : nullptr;
      fusionnet::Trainer<float> t(spec, backend, tc);
      std::vector<fusionnet::Sample> labeled, unlabeled;
      for (auto i : train_idx) labeled.push_back({&imgs[i], index_of(*records[i].label10), i});
      for (auto i : unlabeled_idx) unlabeled.push_back({&imgs[i], -1, i});
      std::optional<fusionnet::SemiConfig> semi;
      if (v.semi && !unlabeled.empty()) semi = config.semi;
      auto log = fusionnet::train<float>(t, labeled, v.semi ? std::span<const fusionnet::Sample>(unlabeled)
                                                            : std::span<const fusionnet::Sample>(), semi);
      std::vector<Image> test_images;
      std::vector<std::string> ids;
      for (auto i : test_idx) {
        test_images.push_back(imgs[i]);
        ids.push_back(records[i].id);
      }
      const auto probs = fusionnet::predict<float>(t.model(), t.backend(), test_images);
      fusionnet::write_predictions_csv(d / "predictions.csv", fusionnet::prediction_rows(ids, probs));
      fusionnet::CheckpointMeta meta;
      meta.seed = tc.seed;
      meta.edge_backend = backend ? backend->id() : "none";
      meta.log = log;
      meta.extra_json = nlohmann::json{{"variant", vname}}.dump();
      fusionnet::save_classifier(d / "model.ckpt", t.model(), meta);
    });
    in_stage(stage, [&] {
      for (const auto& row : fusionnet::read_predictions_csv(dir / "predictions.csv"))
        predictions[vname][row.id] = row.pred10;
    });
  }

  // style
  const auto artists = corpus.manifest.artists();
  std::string reference = config.reference_artist.empty() ? (artists.empty() ? "" : artists.front())
                                                          : config.reference_artist;
  if (!reference.empty() && std::find(artists.begin(), artists.end(), reference) == artists.end())
    throw StageError("style", "reference artist '" + reference + "' has no paintings");

  struct ArtistStyle {
    std::vector<styledist::StyleVector> styles;  // paintings, own encoder
    std::vector<double> iob_a;                   // paintings under the A->P model
    std::vector<double> iob_m_paint, iob_m_photo;  // M = A u P under the M->P model
  };
  std::map<std::string, ArtistStyle> style_data;
  std::vector<std::size_t> photo_idx;
  for (std::size_t i = 0; i < n_records && static_cast<int>(photo_idx.size()) < config.photo_reference; ++i)
    if (records[i].source == Source::photo) photo_idx.push_back(i);

  if (config.run_style && !artists.empty() && !photo_idx.empty()) {
    styledist::DisentangleConfig sc = config.style;
    sc.seed = derived_seed(config.seed, "style");
    const Index r = sc.resolution;
    auto style_image = [&](std::size_t i) { return apply_sky_selection(corpus.images[i], sky[i], r, r).pixels; };
    std::vector<Image> photos;
    std::string photo_ids;
    for (auto i : photo_idx) {
      photos.push_back(style_image(i));
      photo_ids += records[i].id + ";";
    }
    for (const auto& artist : artists) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n_records; ++i)
        if (records[i].source == Source::painting && records[i].artist == artist) idx.push_back(i);
      std::vector<Image> paintings;
      for (auto i : idx) paintings.push_back(style_image(i));
      Hasher h;
      h.field("style").field(seg_key).field(artist).field(sc.to_json()).field(photo_ids);
      const std::string stage = "style-" + safe_name(artist);
      const fs::path dir = cache.stage(stage, h.hex(), [&](const fs::path& d) {
        auto model_a = styledist::train_disentangler(paintings, photos, sc, artist + "->P");
        std::vector<Image> mixed = paintings;
        mixed.insert(mixed.end(), photos.begin(), photos.end());
        auto model_m = styledist::train_disentangler(mixed, photos, sc, artist + "+P->P");
        model_a.save(d / "model_a.ckpt");
        model_m.save(d / "model_m.ckpt");
        const auto& codec_a = model_a.codec(styledist::Disentangler::Domain::a);
        const auto& codec_p = model_a.codec(styledist::Disentangler::Domain::p);
        std::vector<styledist::StyleVector> vecs;
        for (std::size_t k = 0; k < idx.size(); ++k)
          vecs.push_back(styledist::encode_style(codec_a, paintings[k], records[idx[k]].id));
        styledist::write_style_csv(d / "styles.csv", vecs);
        vecs.clear();
        for (std::size_t k = 0; k < photo_idx.size(); ++k)
          vecs.push_back(styledist::encode_style(codec_p, photos[k], records[photo_idx[k]].id));
        styledist::write_style_csv(d / "photo_styles.csv", vecs);
        auto os = open_out(d / "iob.csv");
        os << "set,id,iob\n";
        const auto& codec_m = model_m.codec(styledist::Disentangler::Domain::a);
        for (std::size_t k = 0; k < idx.size(); ++k)
          os << "A," << records[idx[k]].id << ',' << fmt_fixed(styledist::iob(paintings[k], codec_a), 12) << "\n";
        for (std::size_t k = 0; k < mixed.size(); ++k) {
          const auto& id = k < idx.size() ? records[idx[k]].id : records[photo_idx[k - idx.size()]].id;
          os << (k < idx.size() ? "M_painting," : "M_photo,") << id << ','
             << fmt_fixed(styledist::iob(mixed[k], codec_m), 12) << "\n";
        }
      });
      in_stage(stage, [&] {
        ArtistStyle s;
        s.styles = styledist::read_style_csv(dir / "styles.csv");
        for (const auto& row : read_csv_rows(dir / "iob.csv")) {
          const double v = parse_double(row.at(2));
          if (row[0] == "A") s.iob_a.push_back(v);
          else if (row[0] == "M_painting") s.iob_m_paint.push_back(v);
          else s.iob_m_photo.push_back(v);
        }
        style_data[artist] = std::move(s);
      });
    }
  }

  // report
  in_stage("report", [&] {
    fs::create_directories(report.dir);
    auto table = [&](const std::string& name) {
      const fs::path p = report.dir / (name + ".csv");
      report.tables.emplace_back(name, p);
      return open_out(p);
    };
    const std::string& run_id = report.run_id;

    {
      auto os = table("segmentation");
      os << "run_id,id,artist,pixel_accuracy,mean_accuracy,mean_iou\n";
      double sums[3] = {0, 0, 0};
      std::size_t n = 0;
      for (const auto& row : read_csv_rows(seg_dir / "metrics.csv")) {
        os << run_id;
        for (const auto& c : row) os << ',' << c;
        os << "\n";
        for (int k = 0; k < 3; ++k) sums[k] += parse_double(row.at(2 + k));
        ++n;
      }
      if (n) os << run_id << ",mean,," << fx(sums[0] / n) << ',' << fx(sums[1] / n) << ',' << fx(sums[2] / n) << "\n";
    }

    const auto& full = predictions.at("full");
    auto painting_records = [&](const std::optional<std::string>& artist) {
      std::vector<CorpusRecord> out;
      for (auto i : test_idx) {
        const auto& r = records[i];
        if (r.source == Source::painting && (!artist || r.artist == artist)) out.push_back(r);
      }
      return out;
    };
    auto preds_for = [&](const std::map<std::string, int>& p, std::span<const CorpusRecord> rs) {
      std::vector<int> out;
      for (const auto& r : rs) out.push_back(p.at(r.id));
      return out;
    };
    auto truth_for = [](std::span<const CorpusRecord> rs) {
      std::vector<int> out;
      for (const auto& r : rs) out.push_back(index_of(*r.label10));
      return out;
    };

    std::map<std::string, AccuracyCI> artist_acc;
    {
      auto os = table("accuracy");
      os << "run_id,variant,entity,n,correct,accuracy,ci_lo,ci_hi\n";
      auto emit = [&](const std::string& entity, std::span<const CorpusRecord> rs) {
        if (rs.empty()) return;
        auto a = accuracy_with_ci(preds_for(full, rs), truth_for(rs), config.alpha);
        os << run_id << ",full," << entity << ',' << a.n << ',' << a.correct << ',' << fx(a.accuracy) << ','
           << fx(a.lo) << ',' << fx(a.hi) << "\n";
        artist_acc[entity] = a;
      };
      for (const auto& artist : artists) emit(artist, painting_records(artist));
      emit("all_paintings", painting_records(std::nullopt));
      std::vector<CorpusRecord> photo_test;
      for (auto i : test_idx)
        if (records[i].source == Source::photo) photo_test.push_back(records[i]);
      emit("photos", photo_test);
    }

    {
      const auto rs = painting_records(std::nullopt);
      const auto pr = preds_for(full, rs);
      for (auto [name, g] : {std::pair{"confusion_genus", fusionnet::Granularity::genus10},
                             std::pair{"confusion_form", fusionnet::Granularity::form5}}) {
        auto os = table(name);
        if (rs.empty()) {
          os << "run_id,truth\n";
          continue;
        }
        const auto e = fusionnet::evaluate_records(rs, pr, g);
        os << "run_id,truth";
        for (const auto& c : e.class_names) os << ',' << c;
        os << "\n";
        for (Index i = 0; i < e.confusion.rows(); ++i) {
          os << run_id << ',' << e.class_names[i];
          for (Index j = 0; j < e.confusion.cols(); ++j) os << ',' << e.confusion(i, j);
          os << "\n";
        }
      }
    }

    {
      auto os = table("ablation");
      os << "run_id,variant,fusion,semi,sky_selection,photo_n,photo_accuracy,photo_precision,photo_recall,"
            "painting_n,painting_accuracy,painting_precision,painting_recall\n";
      std::vector<CorpusRecord> photo_rs, paint_rs;
      for (auto i : test_idx) (records[i].source == Source::photo ? photo_rs : paint_rs).push_back(records[i]);
      auto block = [&](const std::map<std::string, int>& p, std::span<const CorpusRecord> rs) {
        if (rs.empty()) return std::string("0,,,");
        const auto e = fusionnet::evaluate_records(rs, preds_for(p, rs), fusionnet::Granularity::genus10);
        return std::to_string(e.n) + ',' + fx(e.accuracy) + ',' + fx(e.precision) + ',' + fx(e.recall);
      };
      for (const auto& vname : config.variants) {
        const Variant v = parse_variant(vname);
        const auto& p = predictions.at(vname);
        os << run_id << ',' << vname << ',' << int(v.fusion) << ',' << int(v.semi) << ',' << int(v.sky_selection)
           << ',' << block(p, photo_rs) << ',' << block(p, paint_rs) << "\n";
      }
    }

    std::vector<StatRow> stat_rows;
    const auto ref_acc = artist_acc.find(reference);
    for (const auto& artist : artists) {
      if (artist == reference || ref_acc == artist_acc.end() || !artist_acc.count(artist)) continue;
      const auto& a = ref_acc->second;
      const auto& b = artist_acc.at(artist);
      stat_rows.push_back(guarded("z_prop_cc", reference + " > " + artist, [&] {
        return stats::z_prop_cc(a.correct, a.n, b.correct, b.n, stats::Tail::right);
      }));
    }

    std::map<std::string, std::vector<double>> rstyle_values, dstyle_values;
    std::vector<std::string> dstyle_order;
    if (!style_data.empty()) {
      std::size_t k = config.subsets.subset_size;
      for (const auto& [a, s] : style_data) k = std::min(k, s.styles.size());
      std::uint64_t n_sub = config.subsets.n_subsets;
      if (!config.subsets.with_replacement)
        for (const auto& [a, s] : style_data) n_sub = std::min(n_sub, stats::choose(s.styles.size(), k));
      std::map<std::string, std::vector<std::vector<std::size_t>>> subsets;
      for (std::size_t ai = 0; ai < artists.size(); ++ai) {
        if (!style_data.count(artists[ai])) continue;
        stats::SubsetPlan plan = config.subsets;
        plan.subset_size = static_cast<int>(k);
        plan.n_subsets = static_cast<int>(n_sub);
        plan.seed = derived_seed(config.seed, "subsets:" + artists[ai]);
        subsets[artists[ai]] = stats::resample_subsets(style_data[artists[ai]].styles.size(), plan);
      }
      auto pick = [](const std::vector<styledist::StyleVector>& v, const std::vector<std::size_t>& idx) {
        std::vector<styledist::StyleVector> out;
        for (auto i : idx) out.push_back(v[i]);
        return out;
      };
      for (const auto& artist : artists) {
        if (!style_data.count(artist)) continue;
        const auto& s = style_data[artist];
        const double photo_sum = std::accumulate(s.iob_m_photo.begin(), s.iob_m_photo.end(), 0.0);
        auto& vals = rstyle_values[artist];
        for (const auto& sub : subsets[artist]) {
          double a = 0, m = photo_sum;
          for (auto i : sub) {
            a += s.iob_a[i];
            m += s.iob_m_paint[i];
          }
          vals.push_back((m / (sub.size() + s.iob_m_photo.size())) / (a / sub.size()));
        }
      }
      if (style_data.count(reference)) {
        const auto& ref = style_data[reference];
        stats::SubsetPlan plan = config.subsets;
        plan.subset_size = static_cast<int>(k);
        plan.n_subsets = static_cast<int>(n_sub);
        plan.seed = derived_seed(config.seed, "subsets-second:" + reference);
        auto second = stats::resample_subsets(ref.styles.size(), plan);
        if (stats::choose(ref.styles.size(), k) == n_sub) {
          std::mt19937_64 rng(plan.seed);
          std::shuffle(second.begin(), second.end(), rng);
        }
        const std::string self = reference + " (self)";
        dstyle_order.push_back(self);
        for (std::size_t n = 0; n < second.size(); ++n)
          dstyle_values[self].push_back(
              styledist::d_style(pick(ref.styles, subsets[reference][n]), pick(ref.styles, second[n])).d_style);
        for (const auto& artist : artists) {
          if (artist == reference || !style_data.count(artist)) continue;
          dstyle_order.push_back(artist);
          for (std::size_t n = 0; n < n_sub; ++n)
            dstyle_values[artist].push_back(styledist::d_style(pick(ref.styles, subsets[reference][n]),
                                                               pick(style_data[artist].styles, subsets[artist][n]))
                                                .d_style);
        }
      }
    }

    auto style_table = [&](const std::string& name, const std::vector<std::string>& order,
                           const std::map<std::string, std::vector<double>>& values, const std::string& baseline) {
      auto os = table(name);
      os << "run_id,entity,mean,std,n_subsets,t_statistic,p_value,note\n";
      for (const auto& e : order) {
        const auto& v = values.at(e);
        const auto s = stats::summarize(v);
        os << run_id << ',' << e << ',' << fx(s.mean) << ',' << fx(s.std) << ',' << s.n << ',';
        if (e == baseline || !values.count(baseline)) {
          os << ",,reference\n";
          continue;
        }
        auto row = guarded("t_one_tailed", name + ":" + e, [&] {
          return stats::t_one_tailed(values.at(baseline), v, stats::Tail::left, config.t_variant);
        });
        os << row.statistic << ',' << row.p_value << ',' << row.note << "\n";
        stat_rows.push_back(row);
      }
    };
    std::vector<std::string> rstyle_order;
    for (const auto& a : artists)
      if (rstyle_values.count(a)) rstyle_order.push_back(a);
    style_table("rstyle", rstyle_order, rstyle_values, reference);
    style_table("dstyle", dstyle_order, dstyle_values, dstyle_order.empty() ? "" : dstyle_order.front());

    auto anova_row = [&](const std::string& name, const std::vector<std::string>& order,
                         const std::map<std::string, std::vector<double>>& values) {
      if (order.size() < 2) {
        stat_rows.push_back({"anova_f", name, "", "", "", "", "needs at least 2 groups"});
        return;
      }
      std::vector<std::vector<double>> groups;
      for (const auto& e : order) groups.push_back(values.at(e));
      stat_rows.push_back(guarded("anova_f", name, [&] { return stats::anova_f(groups); }));
    };
    anova_row("rstyle", rstyle_order, rstyle_values);
    anova_row("dstyle", dstyle_order, dstyle_values);

    {
      std::vector<double> acc, rs;
      for (const auto& a : rstyle_order)
        if (artist_acc.count(a)) {
          acc.push_back(artist_acc.at(a).accuracy);
          rs.push_back(stats::summarize(rstyle_values.at(a)).mean);
        }
      if (acc.size() < 3)
        stat_rows.push_back({"pearson", "accuracy~rstyle", "", "", "", "", "needs at least 3 artists"});
      else
        stat_rows.push_back(guarded("pearson", "accuracy~rstyle", [&] { return stats::pearson(acc, rs); }));
    }

    {
      auto os = table("stats");
      os << "run_id,test,entity,statistic,p_value,df1,df2,note\n";
      for (const auto& r : stat_rows)
        os << run_id << ',' << r.test << ',' << r.entity << ',' << r.statistic << ',' << r.p_value << ',' << r.df1
           << ',' << r.df2 << ',' << r.note << "\n";
    }

    nlohmann::ordered_json prov;
    prov["run_id"] = run_id;
    prov["input_hash"] = corpus.hash;
    prov["config"] = nlohmann::ordered_json::parse(config.to_json());
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const auto& e : report.cache_log) stages.push_back({{"stage", e.stage}, {"key", e.key}, {"cache_hit", e.hit}});
    prov["stages"] = stages;
    nlohmann::ordered_json tables = nlohmann::ordered_json::object();
    for (const auto& [n, p] : report.tables) tables[n] = p.filename().string();
    prov["tables"] = tables;
    open_out(report.dir / "provenance.json") << prov.dump(2) << "\n";
  });
  return report;
}

}  // namespace realism::pipeline
