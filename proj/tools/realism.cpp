#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "realism/corpus.hpp"
#include "realism/edgefeat.hpp"
#include "realism/error.hpp"
#include "realism/fixtures.hpp"
#include "realism/format.hpp"
#include "realism/fusionnet/evaluate.hpp"
#include "realism/fusionnet/train.hpp"
#include "realism/image.hpp"
#include "realism/pipeline/config.hpp"
#include "realism/pipeline/run.hpp"
#include "realism/skyseg.hpp"
#include "realism/stats/tests.hpp"
#include "realism/styledist/disentangler.hpp"
#include "realism/styledist/metrics.hpp"

namespace fs = std::filesystem;
using namespace realism;

namespace {

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p, bool& had_header) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  had_header = false;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (first) {
      first = false;
      try {
        (void)parse_double(cells.back());
      } catch (const ParseError&) {
        had_header = true;
        continue;
      }
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  bool h;
  return read_rows(p, h);
}

SkyClassifier sky_classifier(const std::string& path) {
  return path.empty() ? fixtures::default_sky_classifier() : SkyClassifier::load(path);
}

std::vector<Image> load_dir_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no images in " + dir.string());
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(load_image(f));
  return out;
}

std::vector<std::string> dir_image_ids(const fs::path& dir) {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct ClsInputs {
  Manifest manifest;
  std::vector<Image> images;  // at model resolution
};

/// Model-resolution images for every record; sky selection uses ground-truth
/// masks for photos when present and predicted masks otherwise.
ClsInputs classifier_inputs(const fs::path& manifest_path, Index h, Index w, bool sky_selection, const fs::path& masks,
                            const std::string& sky_model, int segments) {
  ClsInputs in;
  in.manifest = load_manifest(manifest_path);
  std::optional<SkySegmenter> seg;
  for (const auto& r : in.manifest.records) {
    Image im = load_image(resolve_image_path(r, manifest_path.parent_path()));
    if (!sky_selection) {
      in.images.push_back(resize_bilinear(im, h, w));
      continue;
    }
    MaskGrid mask;
    const fs::path mp = masks.empty() ? fs::path() : masks / (r.id + ".png");
    if (r.source == Source::photo && !mp.empty() && fs::exists(mp)) {
      mask = load_mask(mp);
    } else {
      if (!seg) seg = SkySegmenter{segments, {}, sky_classifier(sky_model)};
      mask = seg->segment(im);
    }
    in.images.push_back(apply_sky_selection(im, mask, h, w).pixels);
  }
  return in;
}

void print_stat(std::ostream& os, const stats::StatResult& r) {
  os << "test,tail,statistic,p_value,df1,df2,degenerate\n";
  os << stats::to_string(r.test) << ',' << stats::to_string(r.tail) << ',' << fmt_fixed(r.statistic, 6) << ','
     << fmt_sci(r.p_value, 6) << ',' << fmt_fixed(r.df1, 6) << ',' << fmt_fixed(r.df2, 6) << ','
     << int(r.degenerate) << "\n";
}

std::map<std::string, std::vector<double>> grouped(const std::vector<std::vector<std::string>>& rows,
                                                   std::vector<std::string>& order) {
  std::map<std::string, std::vector<double>> g;
  for (const auto& r : rows) {
    if (r.size() < 2) throw ParseError("expected group,value rows");
    if (!g.count(r[0])) order.push_back(r[0]);
    g[r[0]].push_back(parse_double(r[1]));
  }
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cloud realism analysis: sky segmentation, cloud classification, style metrics, statistics"};
  app.require_subcommand(1);

  // make-fixture
  auto* mk = app.add_subcommand("make-fixture", "Write the synthetic corpus and a run config for it");
  fs::path mk_out;
  fixtures::CorpusOptions mk_opt;
  mk->add_option("--out", mk_out, "Output directory")->required();
  mk->add_option("--artists", mk_opt.artists, "Number of artists (<= 4)");
  mk->add_option("--paintings", mk_opt.paintings_per_artist, "Paintings per artist");
  mk->add_option("--photos", mk_opt.photos, "Number of photos");
  mk->add_option("--seed", mk_opt.seed, "Fixture seed");

  // segment
  auto* sg = app.add_subcommand("segment", "Predict sky masks for every manifest image");
  fs::path sg_manifest, sg_out;
  int sg_segments = 48;
  std::string sg_sky;
  sg->add_option("--manifest", sg_manifest)->required();
  sg->add_option("--out", sg_out)->required();
  sg->add_option("--segments", sg_segments, "Target segment count");
  sg->add_option("--sky-model", sg_sky, "Sky classifier JSON (default: built-in)");

  auto* fit = app.add_subcommand("fit-sky", "Fit the sky classifier on annotated images");
  fs::path fit_manifest, fit_masks, fit_out;
  int fit_segments = 48;
  fit->add_option("--manifest", fit_manifest)->required();
  fit->add_option("--masks", fit_masks, "Directory of <id>.png ground-truth masks")->required();
  fit->add_option("--out", fit_out)->required();
  fit->add_option("--segments", fit_segments);

  auto* es = app.add_subcommand("eval-seg", "Score predicted masks against ground truth");
  fs::path es_pred, es_gt, es_out;
  es->add_option("--pred", es_pred)->required();
  es->add_option("--gt", es_gt)->required();
  es->add_option("--out", es_out, "CSV path (default: stdout)");

  // classifier
  auto* tc = app.add_subcommand("train-cls", "Train the cloud classifier");
  fs::path tc_manifest, tc_config, tc_out, tc_masks;
  std::string tc_sky;
  bool tc_semi = false, tc_no_fusion = false, tc_no_sky = false;
  tc->add_option("--manifest", tc_manifest)->required();
  tc->add_option("--config", tc_config, "Run config JSON supplying model/train/semi sections")->required();
  tc->add_option("--out", tc_out, "Checkpoint path")->required();
  tc->add_option("--masks", tc_masks, "Ground-truth masks for photos");
  tc->add_option("--sky-model", tc_sky);
  tc->add_flag("--semi", tc_semi, "Self-train on the unlabeled split");
  tc->add_flag("--no-fusion", tc_no_fusion, "Drop the edge stream");
  tc->add_flag("--no-sky-selection", tc_no_sky, "Feed whole images");

  auto* cl = app.add_subcommand("classify", "Write posteriors for labeled test records");
  fs::path cl_ckpt, cl_manifest, cl_out, cl_masks, cl_hed;
  std::string cl_sky;
  bool cl_all = false;
  cl->add_option("--ckpt", cl_ckpt)->required();
  cl->add_option("--manifest", cl_manifest)->required();
  cl->add_option("--out", cl_out)->required();
  cl->add_option("--masks", cl_masks);
  cl->add_option("--sky-model", cl_sky);
  cl->add_option("--hed", cl_hed, "HED checkpoint when the model was trained with it");
  cl->add_flag("--all", cl_all, "Classify every record, not only the test split");

  auto* ec = app.add_subcommand("eval-cls", "Score a predictions file");
  fs::path ec_preds, ec_manifest, ec_confusion;
  std::string ec_gran = "10";
  ec->add_option("--preds", ec_preds)->required();
  ec->add_option("--manifest", ec_manifest, "Manifest holding the labels")->required();
  ec->add_option("--granularity", ec_gran)->check(CLI::IsMember({"10", "5"}));
  ec->add_option("--confusion", ec_confusion, "Write the confusion matrix CSV here");

  // style
  auto* ts = app.add_subcommand("train-style", "Train an artist->photo disentangler and export style vectors");
  fs::path ts_artist, ts_photos, ts_out, ts_config;
  ts->add_option("--artist", ts_artist, "Directory of the artist's (sky-selected) paintings")->required();
  ts->add_option("--photos", ts_photos, "Directory of reference photos")->required();
  ts->add_option("--out", ts_out, "Output directory")->required();
  ts->add_option("--config", ts_config, "Style config JSON");

  auto* sm = app.add_subcommand("style-metrics", "Subset-resampled D_style or R_style (entity, mean, std)");
  std::string sm_mode;
  fs::path sm_a, sm_b, sm_artist, sm_photos, sm_config, sm_out;
  stats::SubsetPlan sm_plan;
  sm->add_option("--mode", sm_mode)->required()->check(CLI::IsMember({"dstyle", "rstyle"}));
  sm->add_option("--a", sm_a, "dstyle: style CSV of set A");
  sm->add_option("--b", sm_b, "dstyle: style CSV of set B");
  sm->add_option("--artist", sm_artist, "rstyle: painting directory");
  sm->add_option("--photos", sm_photos, "rstyle: photo directory");
  sm->add_option("--config", sm_config, "rstyle: style config JSON");
  sm->add_option("--k", sm_plan.subset_size, "Subset size");
  sm->add_option("--n", sm_plan.n_subsets, "Number of subsets");
  sm->add_option("--seed", sm_plan.seed);
  sm->add_option("--out", sm_out, "CSV path (default: stdout)");

  // stats
  auto* st = app.add_subcommand("stats", "Statistical tests on CSV input");
  std::string st_mode, st_tail = "right";
  fs::path st_in, st_out;
  bool st_pooled = false;
  double st_alpha = 0.05;
  st->add_option("--mode", st_mode)->check(CLI::IsMember({"ci", "ztest", "ttest", "anova", "pearson"}));
  st->add_option("--in", st_in);
  st->add_option("--out", st_out, "CSV path (default: stdout)");
  st->add_option("--tail", st_tail)->check(CLI::IsMember({"left", "right", "two"}));
  st->add_option("--alpha", st_alpha);
  st->add_flag("--pooled", st_pooled, "Pooled-variance t test instead of Welch");
  auto* rs = st->add_subcommand("resample", "List resampled subsets of a population");
  stats::SubsetPlan rs_plan;
  std::size_t rs_population = 0;
  rs->add_option("--population", rs_population, "Population size")->required();
  rs->add_option("--n", rs_plan.n_subsets);
  rs->add_option("--k", rs_plan.subset_size);
  rs->add_option("--seed", rs_plan.seed);
  rs->add_flag("--with-replacement", rs_plan.with_replacement);

  // run
  auto* run = app.add_subcommand("run", "Run the end-to-end experiment");
  fs::path run_config, run_out, run_manifest;
  std::optional<std::uint64_t> run_seed;
  std::vector<std::string> run_variants;
  bool run_no_style = false, run_no_fusion = false, run_no_sky = false, run_semi = false;
  run->add_option("--config", run_config)->required();
  run->add_option("--out", run_out, "Override output_dir");
  run->add_option("--manifest", run_manifest, "Override manifest");
  run->add_option("--seed", run_seed, "Override seed");
  run->add_option("--variants", run_variants, "Override the classifier variants");
  run->add_flag("--no-style", run_no_style, "Skip the style branch");
  run->add_flag("--no-fusion", run_no_fusion, "Ensure the no-fusion variant is run");
  run->add_flag("--no-sky-selection", run_no_sky, "Ensure the no-sky-selection variant is run");
  run->add_flag("--semi", run_semi, "Ensure the no-semi comparison variant is run");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ostream* out = &std::cout;
    std::ofstream file_out;
    auto sink = [&](const fs::path& p) -> std::ostream& {
      if (p.empty()) return *out;
      file_out = open_out(p);
      return file_out;
    };

    if (*mk) {
      auto paths = fixtures::write_corpus(mk_out, mk_opt);
      auto cfg = pipeline::RunConfig::fixture("manifest.jsonl", "masks", "out");
      open_out(mk_out / "run.json") << cfg.to_json() << "\n";
      std::cout << "wrote " << paths.manifest.string() << " and " << (mk_out / "run.json").string() << "\n";
    } else if (*sg) {
      const auto m = load_manifest(sg_manifest);
      SkySegmenter seg{sg_segments, {}, sky_classifier(sg_sky)};
      fs::create_directories(sg_out);
      for (const auto& r : m.records)
        save_mask(seg.segment(load_image(resolve_image_path(r, sg_manifest.parent_path()))), sg_out / (r.id + ".png"));
      std::cout << "wrote " << m.size() << " masks to " << sg_out.string() << "\n";
    } else if (*fit) {
      const auto m = load_manifest(fit_manifest);
      std::vector<Image> images;
      std::vector<MaskGrid> masks;
      for (const auto& r : m.records) {
        const auto mp = fit_masks / (r.id + ".png");
        if (!fs::exists(mp)) continue;
        images.push_back(load_image(resolve_image_path(r, fit_manifest.parent_path())));
        masks.push_back(load_mask(mp));
      }
      if (images.empty()) throw DataError("no manifest record has a mask in " + fit_masks.string());
      fit_sky_classifier(images, masks, fit_segments).save(fit_out);
      std::cout << "fitted on " << images.size() << " images -> " << fit_out.string() << "\n";
    } else if (*es) {
      auto& os = sink(es_out);
      os << "id,pixel_accuracy,mean_accuracy,mean_iou\n";
      double sum[3] = {0, 0, 0};
      int n = 0;
      for (const auto& id : dir_image_ids(es_pred)) {
        const auto gt = es_gt / (id + ".png");
        if (!fs::exists(gt)) continue;
        const auto m = seg_metrics(load_mask(es_pred / (id + ".png")), load_mask(gt));
        os << id << ',' << fmt_fixed(m.pixel_accuracy) << ',' << fmt_fixed(m.mean_accuracy) << ','
           << fmt_fixed(m.mean_iou) << "\n";
        sum[0] += m.pixel_accuracy;
        sum[1] += m.mean_accuracy;
        sum[2] += m.mean_iou;
        ++n;
      }
      if (n == 0) throw DataError("no predicted mask has a ground-truth counterpart");
      os << "mean," << fmt_fixed(sum[0] / n) << ',' << fmt_fixed(sum[1] / n) << ',' << fmt_fixed(sum[2] / n) << "\n";
    } else if (*tc) {
      auto cfg = pipeline::RunConfig::from_json(slurp(tc_config), tc_config.parent_path());
      auto spec = tc_no_fusion ? cfg.model.without_fusion() : cfg.model;
      auto in = classifier_inputs(tc_manifest, spec.input_height, spec.input_width, !tc_no_sky, tc_masks, tc_sky,
                                  cfg.segments);
      std::vector<fusionnet::Sample> labeled, unlabeled;
      for (std::size_t i = 0; i < in.manifest.size(); ++i) {
        const auto& r = in.manifest.records[i];
        if (r.split == Split::train && r.label10) labeled.push_back({&in.images[i], index_of(*r.label10), i});
        if (r.split == Split::unlabeled) unlabeled.push_back({&in.images[i], -1, i});
      }
      fusionnet::TrainConfig train = cfg.train;
      train.seed = cfg.seed;
      auto backend = tc_no_fusion ? nullptr : make_edge_backend(cfg.edge_backend, cfg.hed_checkpoint);
      fusionnet::Trainer<float> t(spec, backend, train);
      std::optional<fusionnet::SemiConfig> semi;
      if (tc_semi) semi = cfg.semi;
      auto log = fusionnet::train<float>(t, labeled, unlabeled, semi);
      fusionnet::CheckpointMeta meta;
      meta.seed = train.seed;
      meta.edge_backend = backend ? backend->id() : "none";
      meta.log = log;
      meta.extra_json =
          nlohmann::json{{"sky_selection", !tc_no_sky}, {"semi", tc_semi}, {"segments", cfg.segments}}.dump();
      fusionnet::save_classifier(tc_out, t.model(), meta);
      std::cout << "trained " << log.entries.size() << " steps, final loss "
                << fmt_fixed(log.entries.empty() ? 0.0 : log.entries.back().loss.total) << " -> " << tc_out.string()
                << "\n";
    } else if (*cl) {
      const auto spec = fusionnet::read_classifier_spec(cl_ckpt);
      fusionnet::FusionNet<float> model(spec, 0);
      const auto meta = fusionnet::load_classifier(cl_ckpt, model);
      const auto extra = nlohmann::json::parse(meta.extra_json);
      const bool sky_sel = extra.value("sky_selection", true);
      auto in = classifier_inputs(cl_manifest, spec.input_height, spec.input_width, sky_sel, cl_masks, cl_sky,
                                  extra.value("segments", 48));
      std::vector<Image> images;
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < in.manifest.size(); ++i)
        if (cl_all || in.manifest.records[i].split == Split::test) {
          images.push_back(in.images[i]);
          ids.push_back(in.manifest.records[i].id);
        }
      if (images.empty()) throw DataError("no records to classify");
      std::shared_ptr<const EdgeBackend> backend;
      if (spec.any_fusion()) backend = make_edge_backend(meta.edge_backend == "fixed" ? "fixed" : "hed", cl_hed);
      const auto probs = fusionnet::predict<float>(model, backend.get(), images);
      fusionnet::write_predictions_csv(cl_out, fusionnet::prediction_rows(ids, probs));
      std::cout << "wrote " << ids.size() << " predictions to " << cl_out.string() << "\n";
    } else if (*ec) {
      const auto m = load_manifest(ec_manifest, {false});
      std::vector<CorpusRecord> recs;
      std::vector<int> pred;
      for (const auto& row : fusionnet::read_predictions_csv(ec_preds)) {
        const auto* r = m.find(row.id);
        if (!r) throw ValidationError("prediction for unknown id '" + row.id + "'");
        if (!r->labeled()) continue;
        recs.push_back(*r);
        pred.push_back(row.pred10);
      }
      const auto e = fusionnet::evaluate_records(recs, pred, fusionnet::parse_granularity(ec_gran));
      std::cout << "n,accuracy,precision,recall\n"
                << e.n << ',' << fmt_fixed(e.accuracy) << ',' << fmt_fixed(e.precision) << ',' << fmt_fixed(e.recall)
                << "\n";
      if (!ec_confusion.empty()) open_out(ec_confusion) << fusionnet::confusion_csv(e);
    } else if (*ts) {
      auto cfg = ts_config.empty() ? styledist::DisentangleConfig{} : styledist::DisentangleConfig::from_json(slurp(ts_config));
      const auto a = styledist::to_style_resolution(load_dir_images(ts_artist), cfg.resolution);
      const auto p = styledist::to_style_resolution(load_dir_images(ts_photos), cfg.resolution);
      auto model = styledist::train_disentangler(a, p, cfg, ts_artist.filename().string() + "->P");
      fs::create_directories(ts_out);
      model.save(ts_out / "model.ckpt");
      auto export_styles = [&](const std::vector<Image>& imgs, const std::vector<std::string>& ids,
                               styledist::Disentangler::Domain d, const fs::path& path) {
        std::vector<styledist::StyleVector> v;
        for (std::size_t i = 0; i < imgs.size(); ++i) v.push_back(styledist::encode_style(model.codec(d), imgs[i], ids[i]));
        styledist::write_style_csv(path, v);
      };
      export_styles(a, dir_image_ids(ts_artist), styledist::Disentangler::Domain::a, ts_out / "styles.csv");
      export_styles(p, dir_image_ids(ts_photos), styledist::Disentangler::Domain::p, ts_out / "photo_styles.csv");
      std::cout << "trained " << cfg.steps << " steps -> " << ts_out.string() << "\n";
    } else if (*sm) {
      auto& os = sink(sm_out);
      os << "entity,mean,std,n_subsets\n";
      auto plan_for = [&](std::size_t n) {
        auto plan = sm_plan;
        plan.subset_size = static_cast<int>(std::min<std::size_t>(plan.subset_size, n));
        if (!plan.with_replacement)
          plan.n_subsets = static_cast<int>(std::min<std::uint64_t>(plan.n_subsets, stats::choose(n, plan.subset_size)));
        return plan;
      };
      if (sm_mode == "dstyle") {
        if (sm_a.empty() || sm_b.empty()) throw InvalidArgument("dstyle needs --a and --b");
        const auto a = styledist::read_style_csv(sm_a), b = styledist::read_style_csv(sm_b);
        auto pa = plan_for(a.size()), pb = plan_for(b.size());
        pa.n_subsets = pb.n_subsets = std::min(pa.n_subsets, pb.n_subsets);
        pb.seed = pa.seed + 1;
        const auto sa = stats::resample_subsets(a.size(), pa), sb = stats::resample_subsets(b.size(), pb);
        std::vector<double> vals;
        for (std::size_t n = 0; n < sa.size(); ++n) {
          std::vector<styledist::StyleVector> x, y;
          for (auto i : sa[n]) x.push_back(a[i]);
          for (auto i : sb[n]) y.push_back(b[i]);
          vals.push_back(styledist::d_style(x, y).d_style);
        }
        const auto s = stats::summarize(vals);
        os << sm_a.stem().string() << "~" << sm_b.stem().string() << ',' << fmt_fixed(s.mean) << ','
           << fmt_fixed(s.std) << ',' << s.n << "\n";
      } else {
        if (sm_artist.empty() || sm_photos.empty()) throw InvalidArgument("rstyle needs --artist and --photos");
        auto cfg = sm_config.empty() ? styledist::DisentangleConfig{} : styledist::DisentangleConfig::from_json(slurp(sm_config));
        const auto a = styledist::to_style_resolution(load_dir_images(sm_artist), cfg.resolution);
        const auto p = styledist::to_style_resolution(load_dir_images(sm_photos), cfg.resolution);
        std::vector<Image> mixed = a;
        mixed.insert(mixed.end(), p.begin(), p.end());
        auto ma = styledist::train_disentangler(a, p, cfg, "A");
        auto mm = styledist::train_disentangler(mixed, p, cfg, "M");
        const auto ia = styledist::iob_values(a, ma.codec(styledist::Disentangler::Domain::a));
        const auto im = styledist::iob_values(mixed, mm.codec(styledist::Disentangler::Domain::a));
        double photo_sum = 0;
        for (std::size_t i = a.size(); i < im.size(); ++i) photo_sum += im[i];
        std::vector<double> vals;
        for (const auto& sub : stats::resample_subsets(a.size(), plan_for(a.size()))) {
          double x = 0, y = photo_sum;
          for (auto i : sub) {
            x += ia[i];
            y += im[i];
          }
          vals.push_back((y / (sub.size() + p.size())) / (x / sub.size()));
        }
        const auto s = stats::summarize(vals);
        os << sm_artist.filename().string() << ',' << fmt_fixed(s.mean) << ',' << fmt_fixed(s.std) << ',' << s.n
           << "\n";
      }
    } else if (*st) {
      if (*rs) {
        for (const auto& s : stats::resample_subsets(rs_population, rs_plan)) {
          for (std::size_t i = 0; i < s.size(); ++i) std::cout << (i ? "," : "") << s[i];
          std::cout << "\n";
        }
        return 0;
      }
      if (st_mode.empty() || st_in.empty()) throw InvalidArgument("stats needs --mode and --in (or the resample subcommand)");
      const auto rows = read_rows(st_in);
      if (rows.empty()) throw DataError("no data rows in " + st_in.string());
      auto& os = sink(st_out);
      const auto tail = stats::parse_tail(st_tail);
      if (st_mode == "ci") {
        os << "k,n,alpha,accuracy,ci_lo,ci_hi\n";
        for (const auto& r : rows) {
          if (r.size() < 2) throw ParseError("ci rows are k,n[,alpha]");
          const long k = std::lround(parse_double(r[0])), n = std::lround(parse_double(r[1]));
          const double alpha = r.size() > 2 ? parse_double(r[2]) : st_alpha;
          const auto ci = stats::wald_ci(k, n, alpha);
          os << k << ',' << n << ',' << fmt_fixed(alpha, 4) << ',' << fmt_fixed(double(k) / n) << ','
             << fmt_fixed(ci.lo) << ',' << fmt_fixed(ci.hi) << "\n";
        }
      } else if (st_mode == "ztest") {
        os << "k1,n1,k2,n2,statistic,p_value,degenerate\n";
        for (const auto& r : rows) {
          if (r.size() < 4) throw ParseError("ztest rows are k1,n1,k2,n2");
          long v[4];
          for (int i = 0; i < 4; ++i) v[i] = std::lround(parse_double(r[i]));
          const auto z = stats::z_prop_cc(v[0], v[1], v[2], v[3], tail);
          os << v[0] << ',' << v[1] << ',' << v[2] << ',' << v[3] << ',' << fmt_fixed(z.statistic) << ','
             << fmt_sci(z.p_value) << ',' << int(z.degenerate) << "\n";
        }
      } else if (st_mode == "ttest" || st_mode == "anova") {
        std::vector<std::string> order;
        auto g = grouped(rows, order);
        if (st_mode == "ttest") {
          if (order.size() != 2) throw InvalidArgument("ttest needs exactly two groups");
          print_stat(os, stats::t_one_tailed(g[order[0]], g[order[1]], tail,
                                             st_pooled ? stats::TVariant::pooled : stats::TVariant::welch));
        } else {
          std::vector<std::vector<double>> groups;
          for (const auto& k : order) groups.push_back(g[k]);
          print_stat(os, stats::anova_f(groups));
        }
      } else {
        std::vector<double> x, y;
        for (const auto& r : rows) {
          if (r.size() < 2) throw ParseError("pearson rows are x,y");
          x.push_back(parse_double(r[0]));
          y.push_back(parse_double(r[1]));
        }
        print_stat(os, stats::pearson(x, y));
      }
    } else if (*run) {
      auto cfg = pipeline::RunConfig::load(run_config);
      if (!run_out.empty()) cfg.output_dir = run_out;
      if (!run_manifest.empty()) cfg.manifest = run_manifest;
      if (run_seed) cfg.seed = *run_seed;
      if (!run_variants.empty()) cfg.variants = run_variants;
      auto ensure = [&](const std::string& v) {
        if (std::find(cfg.variants.begin(), cfg.variants.end(), v) == cfg.variants.end()) cfg.variants.push_back(v);
      };
      if (run_no_fusion) ensure("no-fusion");
      if (run_no_sky) ensure("no-sky-selection");
      if (run_semi) ensure("no-semi");
      if (run_no_style) cfg.run_style = false;
      const auto report = pipeline::run_experiment(cfg, &std::cout);
      std::cout << "run " << report.run_id << ": " << report.recomputed() << " stage(s) computed, "
                << report.cache_log.size() - report.recomputed() << " cached; tables in " << report.dir.string()
                << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
