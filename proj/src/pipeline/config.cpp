#include "realism/pipeline/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "realism/error.hpp"

namespace realism::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

Variant parse_variant(const std::string& name) {
  if (name == "full") return {name, true, true, true};
  if (name == "no-fusion") return {name, false, true, true};
  if (name == "no-semi") return {name, true, false, true};
  if (name == "no-sky-selection") return {name, true, true, false};
  throw InvalidArgument("unknown variant '" + name + "' (full, no-fusion, no-semi, no-sky-selection)");
}

void RunConfig::validate() const {
  if (manifest.empty()) throw ValidationError("run config needs a manifest");
  if (output_dir.empty()) throw ValidationError("run config needs an output_dir");
  if (edge_backend != "fixed" && edge_backend != "hed") throw ValidationError("edge.backend.kind must be fixed or hed");
  if (edge_backend == "hed" && hed_checkpoint.empty()) throw ValidationError("hed backend needs edge.backend.checkpoint");
  if (segments < 2) throw ValidationError("segments must be >= 2");
  if (seed_block < 1) throw ValidationError("seed_block must be >= 1");
  if (variants.empty()) throw ValidationError("at least one classifier variant is needed");
  std::set<std::string> seen;
  for (const auto& v : variants) {
    parse_variant(v);
    if (!seen.insert(v).second) throw ValidationError("variant '" + v + "' listed twice");
  }
  if (!seen.count("full")) throw ValidationError("variants must include full");
  if (photo_reference < 1) throw ValidationError("photo_reference must be >= 1");
  if (!(alpha > 0 && alpha < 1)) throw ValidationError("alpha must lie in (0, 1)");
  if (subsets.subset_size < 1 || subsets.n_subsets < 1) throw ValidationError("subset plan sizes must be positive");
  model.validate();
  train.validate();
  semi.pseudo.validate();
  style.validate();
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["manifest"] = manifest.string();
  j["output_dir"] = output_dir.string();
  j["masks_dir"] = masks_dir.string();
  j["sky_model"] = sky_model.string();
  j["edge"] = {{"backend", {{"kind", edge_backend}, {"checkpoint", hed_checkpoint.string()}}}};
  j["seed"] = seed;
  j["segmentation"] = {{"segments", segments}, {"seed_block", seed_block}};
  j["model"] = ordered_json::parse(model.to_json());
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"steps", train.steps}};
  j["semi"] = {{"threshold", semi.pseudo.threshold},
               {"unlabeled_loss_weight", semi.pseudo.unlabeled_loss_weight},
               {"rounds", semi.rounds},
               {"epochs_per_round", semi.epochs_per_round},
               {"steps_per_round", semi.steps_per_round},
               {"unlabeled_batch_size", semi.unlabeled_batch_size}};
  j["variants"] = variants;
  auto style_json = ordered_json::parse(style.to_json());
  style_json.erase("seed");
  j["style"] = {{"enabled", run_style},
                {"photo_reference", photo_reference},
                {"reference_artist", reference_artist},
                {"model", style_json}};
  j["stats"] = {{"alpha", alpha},
                {"subset_size", subsets.subset_size},
                {"n_subsets", subsets.n_subsets},
                {"with_replacement", subsets.with_replacement},
                {"t_variant", t_variant == stats::TVariant::welch ? "welch" : "pooled"}};
  return j.dump(2);
}

namespace {

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

std::filesystem::path path_value(const json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key)) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  RunConfig c;
  try {
    only_keys(j,
              {"manifest", "output_dir", "masks_dir", "sky_model", "edge", "seed",
               "segmentation", "model", "train", "semi", "variants", "style", "stats"},
              "run config");
    c.manifest = path_value(j, "manifest", base);
    c.output_dir = path_value(j, "output_dir", base);
    c.masks_dir = path_value(j, "masks_dir", base);
    c.sky_model = path_value(j, "sky_model", base);
    if (j.contains("edge")) {
      only_keys(j["edge"], {"backend"}, "edge");
      const auto& b = j["edge"].at("backend");
      only_keys(b, {"kind", "checkpoint"}, "edge.backend");
      c.edge_backend = b.value("kind", c.edge_backend);
      c.hed_checkpoint = path_value(b, "checkpoint", base);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("segmentation")) {
      const auto& s = j["segmentation"];
      only_keys(s, {"segments", "seed_block"}, "segmentation");
      c.segments = s.value("segments", c.segments);
      c.seed_block = s.value("seed_block", c.seed_block);
    }
    if (j.contains("model")) {
      auto m = j["model"];
      std::string preset = m.value("preset", "");
      ordered_json base_spec = ordered_json::parse(
          (preset == "miniature" ? fusionnet::ModelSpec::miniature() : fusionnet::ModelSpec::paper_default()).to_json());
      if (!preset.empty() && preset != "miniature" && preset != "paper") throw ValidationError("unknown model preset");
      m.erase("preset");
      for (auto it = m.begin(); it != m.end(); ++it) base_spec[it.key()] = it.value();
      c.model = fusionnet::ModelSpec::from_json(base_spec.dump());
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      only_keys(t, {"learning_rate", "batch_size", "epochs", "steps"}, "train");
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.steps = t.value("steps", c.train.steps);
    }
    if (j.contains("semi")) {
      const auto& s = j["semi"];
      only_keys(s,
                {"threshold", "unlabeled_loss_weight", "rounds", "epochs_per_round", "steps_per_round",
                 "unlabeled_batch_size"},
                "semi");
      c.semi.pseudo.threshold = s.value("threshold", c.semi.pseudo.threshold);
      c.semi.pseudo.unlabeled_loss_weight = s.value("unlabeled_loss_weight", c.semi.pseudo.unlabeled_loss_weight);
      c.semi.rounds = s.value("rounds", c.semi.rounds);
      c.semi.epochs_per_round = s.value("epochs_per_round", c.semi.epochs_per_round);
      c.semi.steps_per_round = s.value("steps_per_round", c.semi.steps_per_round);
      c.semi.unlabeled_batch_size = s.value("unlabeled_batch_size", c.semi.unlabeled_batch_size);
    }
    if (j.contains("variants")) c.variants = j["variants"].get<std::vector<std::string>>();
    if (j.contains("style")) {
      const auto& s = j["style"];
      only_keys(s, {"enabled", "photo_reference", "reference_artist", "model"}, "style");
      c.run_style = s.value("enabled", c.run_style);
      c.photo_reference = s.value("photo_reference", c.photo_reference);
      c.reference_artist = s.value("reference_artist", c.reference_artist);
      if (s.contains("model")) {
        auto merged = json::parse(c.style.to_json());
        for (auto it = s["model"].begin(); it != s["model"].end(); ++it) merged[it.key()] = it.value();
        c.style = styledist::DisentangleConfig::from_json(merged.dump());
      }
    }
    if (j.contains("stats")) {
      const auto& s = j["stats"];
      only_keys(s, {"alpha", "subset_size", "n_subsets", "with_replacement", "t_variant"}, "stats");
      c.alpha = s.value("alpha", c.alpha);
      c.subsets.subset_size = s.value("subset_size", c.subsets.subset_size);
      c.subsets.n_subsets = s.value("n_subsets", c.subsets.n_subsets);
      c.subsets.with_replacement = s.value("with_replacement", c.subsets.with_replacement);
      const std::string tv = s.value("t_variant", "welch");
      if (tv != "welch" && tv != "pooled") throw ValidationError("t_variant must be welch or pooled");
      c.t_variant = tv == "welch" ? stats::TVariant::welch : stats::TVariant::pooled;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.parent_path());
}

RunConfig RunConfig::fixture(const std::filesystem::path& manifest, const std::filesystem::path& masks_dir,
                             const std::filesystem::path& output_dir) {
  RunConfig c;
  c.manifest = manifest;
  c.masks_dir = masks_dir;
  c.output_dir = output_dir;
  c.seed = 7;
  c.model = fusionnet::ModelSpec::miniature(10);
  c.model.input_height = c.model.input_width = 64;
  c.train.learning_rate = 1e-3;
  c.train.batch_size = 8;
  c.train.steps = 400;
  c.semi.steps_per_round = 200;
  c.style.resolution = 32;
  c.style.base_channels = 8;
  c.style.mlp_dim = 16;
  c.style.steps = 300;
  c.style.learning_rate = 1e-3;
  c.photo_reference = 30;
  return c;
}

}  // namespace realism::pipeline
