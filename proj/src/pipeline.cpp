#include "traitscale/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "traitscale/classify.hpp"
#include "traitscale/cwm.hpp"
#include "traitscale/error.hpp"
#include "traitscale/model_io.hpp"
#include "traitscale/parallel.hpp"
#include "traitscale/raster_features.hpp"
#include "traitscale/sha256.hpp"

namespace traitscale {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error("config: unknown key '" + key + "' in " + where);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json j = json::parse(text);
  reject_unknown(j,
                 {"run_dir", "seed", "threads", "stages", "synth", "gapfill", "classify",
                  "cwm", "train", "predict"},
                 "top level");

  PipelineConfig cfg;
  cfg.run_dir = j.value("run_dir", cfg.run_dir.string());
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  if (cfg.threads < 0) throw Error("config: threads must be >= 0");

  if (j.contains("stages")) {
    const json& s = j.at("stages");
    reject_unknown(
        s, {"synth", "gapfill", "features", "classify", "cwm", "train", "predict", "report"},
        "stages");
    cfg.stages.synth = s.value("synth", true);
    cfg.stages.gapfill = s.value("gapfill", true);
    cfg.stages.features = s.value("features", true);
    cfg.stages.classify = s.value("classify", true);
    cfg.stages.cwm = s.value("cwm", true);
    cfg.stages.train = s.value("train", true);
    cfg.stages.predict = s.value("predict", true);
    cfg.stages.report = s.value("report", true);
  }

  if (j.contains("synth")) {
    const json& s = j.at("synth");
    reject_unknown(s,
                   {"fine_width", "fine_height", "coarse_ratio", "origin_lat", "origin_lon",
                    "fine_pixel_deg", "year_lo", "year_hi", "reference_years",
                    "reference_noise", "n_records", "missing_fraction", "georef_fraction",
                    "species_per_pft", "species_var_frac", "climate_var_frac",
                    "qa_invalid_fraction", "reflectance_noise"},
                   "synth");
    SynthConfig& sc = cfg.synth;
    sc.fine_width = s.value("fine_width", sc.fine_width);
    sc.fine_height = s.value("fine_height", sc.fine_height);
    sc.coarse_ratio = s.value("coarse_ratio", sc.coarse_ratio);
    sc.origin_lat = s.value("origin_lat", sc.origin_lat);
    sc.origin_lon = s.value("origin_lon", sc.origin_lon);
    sc.fine_pixel_deg = s.value("fine_pixel_deg", sc.fine_pixel_deg);
    sc.year_lo = s.value("year_lo", sc.year_lo);
    sc.year_hi = s.value("year_hi", sc.year_hi);
    sc.reference_years = s.value("reference_years", sc.reference_years);
    sc.reference_noise = s.value("reference_noise", sc.reference_noise);
    sc.n_records = s.value("n_records", sc.n_records);
    if (s.contains("missing_fraction")) {
      const auto mf = s.at("missing_fraction").get<std::vector<double>>();
      if (mf.size() != kNumTraits) throw Error("config: missing_fraction needs 5 entries");
      for (int t = 0; t < kNumTraits; ++t) {
        if (mf[t] < 0.0 || mf[t] >= 1.0)
          throw Error("config: missing_fraction entries must lie in [0, 1)");
        sc.missing_fraction[t] = mf[t];
      }
    }
    sc.georef_fraction = s.value("georef_fraction", sc.georef_fraction);
    sc.species_per_pft = s.value("species_per_pft", sc.species_per_pft);
    sc.species_var_frac = s.value("species_var_frac", sc.species_var_frac);
    sc.climate_var_frac = s.value("climate_var_frac", sc.climate_var_frac);
    sc.qa_invalid_fraction = s.value("qa_invalid_fraction", sc.qa_invalid_fraction);
    sc.reflectance_noise = s.value("reflectance_noise", sc.reflectance_noise);
    if (sc.coarse_ratio < 1) throw Error("config: coarse_ratio must be >= 1");
    if (sc.species_var_frac + sc.climate_var_frac > 1.0)
      throw Error("config: species_var_frac + climate_var_frac must be <= 1");
    if (sc.georef_fraction < 0.0 || sc.georef_fraction > 1.0)
      throw Error("config: georef_fraction must lie in [0, 1]");
  }

  if (j.contains("gapfill")) {
    const json& g = j.at("gapfill");
    reject_unknown(g, {"folds", "grid"}, "gapfill");
    cfg.gapfill_folds = g.value("folds", cfg.gapfill_folds);
    if (cfg.gapfill_folds < 2) throw Error("config: gapfill folds must be >= 2");
    if (g.contains("grid")) {
      const json& gr = g.at("grid");
      reject_unknown(gr, {"n_trees", "learning_rate", "max_splits"}, "gapfill.grid");
      const auto trees = gr.value("n_trees", std::vector<int>{50});
      const auto rates = gr.value("learning_rate", std::vector<double>{0.1});
      const auto splits = gr.value("max_splits", std::vector<int>{63});
      if (trees.empty() || rates.empty() || splits.empty())
        throw Error("config: gapfill grid axes must be non-empty");
      cfg.gapfill_grid.points.clear();
      for (int t : trees)
        for (double lr : rates)
          for (int s : splits) cfg.gapfill_grid.points.push_back({t, lr, s});
    }
  }

  if (j.contains("classify")) {
    const json& c = j.at("classify");
    reject_unknown(c, {"per_class", "quality_threshold", "n_trees", "max_splits"}, "classify");
    cfg.classify.per_class = c.value("per_class", cfg.classify.per_class);
    cfg.classify.quality_threshold = c.value("quality_threshold", cfg.classify.quality_threshold);
    cfg.classify.n_trees = c.value("n_trees", cfg.classify.n_trees);
    cfg.classify.max_splits = c.value("max_splits", cfg.classify.max_splits);
    if (cfg.classify.quality_threshold < 0.0 || cfg.classify.quality_threshold > 1.0)
      throw Error("config: quality_threshold must lie in [0, 1]");
    if (cfg.classify.per_class < 1) throw Error("config: per_class must be >= 1");
  }

  if (j.contains("cwm")) {
    const json& c = j.at("cwm");
    reject_unknown(c, {"max_km", "k", "min_represented"}, "cwm");
    cfg.cwm.max_km = c.value("max_km", cfg.cwm.max_km);
    cfg.cwm.k = c.value("k", cfg.cwm.k);
    cfg.cwm.min_represented = c.value("min_represented", cfg.cwm.min_represented);
    if (!(cfg.cwm.max_km > 0.0)) throw Error("config: cwm max_km must be positive");
    if (cfg.cwm.k < 1) throw Error("config: cwm k must be >= 1");
    if (cfg.cwm.min_represented < 0.0 || cfg.cwm.min_represented >= 1.0)
      throw Error("config: min_represented must lie in [0, 1)");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(
        t, {"methods", "traits", "realizations", "cv_fraction", "inner_folds",
            "robustness_fractions"},
        "train");
    if (t.contains("methods")) {
      cfg.train.methods.clear();
      for (const auto& name : t.at("methods")) {
        const auto m = method_from_name(name.get<std::string>());
        if (!m) throw Error("config: unknown method '" + name.get<std::string>() + "'");
        cfg.train.methods.push_back(*m);
      }
      if (cfg.train.methods.empty()) throw Error("config: train.methods must be non-empty");
    }
    if (t.contains("traits")) {
      cfg.train.traits.clear();
      for (const auto& name : t.at("traits")) {
        const auto tr = trait_from_name(name.get<std::string>());
        if (!tr) throw Error("config: unknown trait '" + name.get<std::string>() + "'");
        cfg.train.traits.push_back(*tr);
      }
      if (cfg.train.traits.empty()) throw Error("config: train.traits must be non-empty");
    }
    cfg.train.realizations = t.value("realizations", cfg.train.realizations);
    cfg.train.cv_fraction = t.value("cv_fraction", cfg.train.cv_fraction);
    cfg.train.inner_folds = t.value("inner_folds", cfg.train.inner_folds);
    if (t.contains("robustness_fractions"))
      cfg.train.robustness_fractions = t.at("robustness_fractions").get<std::vector<double>>();
    if (cfg.train.realizations < 1) throw Error("config: realizations must be >= 1");
    if (!(cfg.train.cv_fraction > 0.0 && cfg.train.cv_fraction < 1.0))
      throw Error("config: cv_fraction must lie in (0, 1)");
    for (double f : cfg.train.robustness_fractions)
      if (!(f > 0.0 && f <= cfg.train.cv_fraction))
        throw Error("config: robustness fractions must lie in (0, cv_fraction]");
  }

  if (j.contains("predict")) {
    const json& p = j.at("predict");
    reject_unknown(p, {"method"}, "predict");
    if (p.contains("method")) {
      const auto m = method_from_name(p.at("method").get<std::string>());
      if (!m) throw Error("config: unknown predict method");
      cfg.predict_method = *m;
    }
  }
  return cfg;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
  json j;
  j["run_dir"] = cfg.run_dir.string();
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["stages"] = {{"synth", cfg.stages.synth},       {"gapfill", cfg.stages.gapfill},
                 {"features", cfg.stages.features}, {"classify", cfg.stages.classify},
                 {"cwm", cfg.stages.cwm},           {"train", cfg.stages.train},
                 {"predict", cfg.stages.predict},   {"report", cfg.stages.report}};
  const SynthConfig& sc = cfg.synth;
  j["synth"] = {{"fine_width", sc.fine_width},
                {"fine_height", sc.fine_height},
                {"coarse_ratio", sc.coarse_ratio},
                {"origin_lat", sc.origin_lat},
                {"origin_lon", sc.origin_lon},
                {"fine_pixel_deg", sc.fine_pixel_deg},
                {"year_lo", sc.year_lo},
                {"year_hi", sc.year_hi},
                {"reference_years", sc.reference_years},
                {"reference_noise", sc.reference_noise},
                {"n_records", sc.n_records},
                {"missing_fraction", sc.missing_fraction},
                {"georef_fraction", sc.georef_fraction},
                {"species_per_pft", sc.species_per_pft},
                {"species_var_frac", sc.species_var_frac},
                {"climate_var_frac", sc.climate_var_frac},
                {"qa_invalid_fraction", sc.qa_invalid_fraction},
                {"reflectance_noise", sc.reflectance_noise}};
  {
    std::vector<int> trees;
    std::vector<double> rates;
    std::vector<int> splits;
    for (const auto& p : cfg.gapfill_grid.points) {
      if (std::find(trees.begin(), trees.end(), p.n_trees) == trees.end())
        trees.push_back(p.n_trees);
      if (std::find(rates.begin(), rates.end(), p.learning_rate) == rates.end())
        rates.push_back(p.learning_rate);
      if (std::find(splits.begin(), splits.end(), p.max_splits) == splits.end())
        splits.push_back(p.max_splits);
    }
    j["gapfill"] = {{"folds", cfg.gapfill_folds},
                    {"grid",
                     {{"n_trees", trees}, {"learning_rate", rates}, {"max_splits", splits}}}};
  }
  j["classify"] = {{"per_class", cfg.classify.per_class},
                   {"quality_threshold", cfg.classify.quality_threshold},
                   {"n_trees", cfg.classify.n_trees},
                   {"max_splits", cfg.classify.max_splits}};
  j["cwm"] = {{"max_km", cfg.cwm.max_km},
              {"k", cfg.cwm.k},
              {"min_represented", cfg.cwm.min_represented}};
  {
    std::vector<std::string> methods, traits;
    for (Method m : cfg.train.methods) methods.emplace_back(method_name(m));
    for (Trait t : cfg.train.traits) traits.emplace_back(trait_name(t));
    j["train"] = {{"methods", methods},
                  {"traits", traits},
                  {"realizations", cfg.train.realizations},
                  {"cv_fraction", cfg.train.cv_fraction},
                  {"inner_folds", cfg.train.inner_folds},
                  {"robustness_fractions", cfg.train.robustness_fractions}};
  }
  j["predict"] = {{"method", std::string(method_name(cfg.predict_method))}};
  return j.dump(2);
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pipeline config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pipeline_config_from_json(text);
}

void save_pipeline_config(const PipelineConfig& config, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write pipeline config: " + path.string());
  out << pipeline_config_to_json(config) << "\n";
}

namespace {

void collect_outputs(const fs::path& run_dir, const fs::path& target, StageRecord& record) {
  auto add_file = [&](const fs::path& p) {
    record.outputs.emplace_back(fs::relative(p, run_dir).string(), sha256_file(p));
  };
  if (fs::is_directory(target)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(target))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add_file(f);
  } else if (fs::is_regular_file(target)) {
    add_file(target);
  }
}

FeatureConfig fine_feature_config(const fs::path& run_dir) {
  FeatureConfig cfg;
  cfg.stack_dir = run_dir / "world" / "stack_fine";
  cfg.reflectance_bands = {"B1", "B2", "B3", "B4", "B5", "B7"};
  cfg.red_band = "B3";
  cfg.nir_band = "B4";
  cfg.blue_band = "B1";
  cfg.swir_band = "B5";
  cfg.lst_band = "LST";
  cfg.elevation_path = run_dir / "world" / "elevation_fine.tsr";
  cfg.out_dir = run_dir / "features_fine";
  return cfg;
}

FeatureConfig coarse_feature_config(const fs::path& run_dir) {
  FeatureConfig cfg;
  cfg.stack_dir = run_dir / "world" / "stack_coarse";
  cfg.reflectance_bands = {"B1", "B2", "B3", "B4", "B5", "B7"};
  cfg.red_band = "B3";
  cfg.nir_band = "B4";
  cfg.blue_band = "B1";
  cfg.swir_band = "B5";
  cfg.lst_band = "";  // the coarse-stage feature list carries no LST
  cfg.elevation_path = run_dir / "world" / "elevation_coarse.tsr";
  for (int k = 1; k <= kNumBioclim; ++k)
    cfg.extra_rasters.push_back(run_dir / "world" / "climate_src" /
                                ("bio" + std::to_string(k) + ".tsr"));
  cfg.out_dir = run_dir / "features_coarse";
  return cfg;
}

}  // namespace

void write_eval_report(const EvalReport& report, const std::string& trait_tag,
                       const std::vector<std::pair<std::string, double>>& importance_ranking,
                       const std::vector<RobustnessPoint>& robustness,
                       const std::filesystem::path& path) {
  json j;
  j["method"] = std::string(method_name(report.method));
  j["trait"] = trait_tag;
  j["n"] = report.n;
  j["n_test"] = report.n_test;
  j["me"] = report.me_mean;
  j["rmse"] = report.rmse_mean;
  j["r_mean"] = report.r_mean;
  j["r_std"] = report.r_std;
  json reals = json::array();
  for (const auto& r : report.realizations) {
    json rj;
    rj["me"] = r.me;
    rj["rmse"] = r.rmse;
    if (r.r.has_value())
      rj["r"] = *r.r;
    else
      rj["r"] = nullptr;
    rj["hyper"] = r.hyper;
    reals.push_back(rj);
  }
  j["realizations"] = reals;
  j["scatter"] = {{"pred", report.scatter_pred},
                  {"obs", report.scatter_obs},
                  {"rows", report.scatter_rows}};
  if (!importance_ranking.empty()) {
    json imp = json::array();
    for (const auto& [name, value] : importance_ranking)
      imp.push_back({{"feature", name}, {"importance", value}});
    j["importance_ranking"] = imp;
  }
  if (!robustness.empty()) {
    json rb = json::array();
    for (const auto& p : robustness)
      rb.push_back({{"fraction", p.fraction},
                    {"r_mean", p.r_mean},
                    {"r_std", p.r_std},
                    {"rmse_mean", p.rmse_mean}});
    j["robustness"] = rb;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write eval report: " + path.string());
  out << j.dump(2) << "\n";
}

RunManifest run_pipeline(const PipelineConfig& config) {
  const fs::path run_dir = config.run_dir;
  fs::create_directories(run_dir);

  RunManifest manifest;
  manifest.version = kVersion;
  manifest.seed = config.seed;
  manifest.threads = effective_threads(config.threads);
  manifest.config_hash = sha256_string(pipeline_config_to_json(config));

  auto write_manifest = [&]() {
    json j;
    j["version"] = manifest.version;
    j["seed"] = manifest.seed;
    j["threads"] = manifest.threads;
    j["config_hash"] = manifest.config_hash;
    if (!manifest.failed_stage.empty()) j["failed_stage"] = manifest.failed_stage;
    json stages = json::array();
    for (const auto& s : manifest.stages) {
      json sj;
      sj["name"] = s.name;
      sj["wall_ms"] = s.wall_ms;
      json outputs = json::array();
      for (const auto& [path, hash] : s.outputs)
        outputs.push_back({{"path", path}, {"sha256", hash}});
      sj["outputs"] = outputs;
      stages.push_back(sj);
    }
    j["stages"] = stages;
    std::ofstream out(run_dir / "manifest.json");
    out << j.dump(2) << "\n";
  };

  auto run_stage = [&](const std::string& name, bool enabled, auto&& body,
                       const std::vector<fs::path>& outputs) {
    if (!enabled) return;
    StageRecord record;
    record.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      manifest.failed_stage = name;
      write_manifest();
      throw Error("stage '" + name + "': " + e.what());
    }
    record.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    for (const auto& out : outputs) collect_outputs(run_dir, out, record);
    manifest.stages.push_back(std::move(record));
  };

  // --- synth ---------------------------------------------------------
  run_stage(
      "synth", config.stages.synth,
      [&] {
        SynthConfig sc = config.synth;
        sc.out_dir = run_dir / "world";
        synth_world(sc, config.seed);
      },
      {run_dir / "world"});

  // --- gapfill -------------------------------------------------------
  run_stage(
      "gapfill", config.stages.gapfill,
      [&] {
        const TraitTable raw = load_trait_table(run_dir / "world" / "records.csv");
        auto [cleaned, removed] = remove_outliers(raw, 1.5);
        auto [kept, dropped] =
            drop_excluded_groups(cleaned, {GrowthForm::Fern, GrowthForm::Crop});
        (void)removed;
        (void)dropped;
        auto [imputed, reports] = gapfill_all(kept, config.gapfill_grid, config.gapfill_folds,
                                              config.seed, config.threads);
        save_trait_table(imputed.table, run_dir / "imputed.csv");
        write_gapfill_reports(reports, run_dir / "gapfill_report.json");
      },
      {run_dir / "imputed.csv", run_dir / "gapfill_report.json"});

  // --- features ------------------------------------------------------
  run_stage(
      "features", config.stages.features,
      [&] {
        for (const FeatureConfig& cfg :
             {fine_feature_config(run_dir), coarse_feature_config(run_dir)}) {
          const TimeStack stack = load_time_stack(cfg.stack_dir);
          const FeatureSet features = build_features(stack, cfg);
          write_feature_dir(features, cfg.out_dir);
          save_feature_config(cfg, cfg.out_dir / "features.cfg");
        }
      },
      {run_dir / "features_fine", run_dir / "features_coarse"});

  // --- classify ------------------------------------------------------
  run_stage(
      "classify", config.stages.classify,
      [&] {
        std::vector<RasterGrid> yearly;
        for (const auto& entry : fs::directory_iterator(run_dir / "world")) {
          const std::string name = entry.path().filename().string();
          if (name.rfind("reference_", 0) == 0 && entry.path().extension() == ".tsr")
            yearly.push_back(read_tsr(entry.path()).single());
        }
        if (yearly.empty()) throw Error("no reference_<year>.tsr maps in world/");
        const RasterGrid reference = mode_composite(yearly);
        TsrHeader class_header;
        class_header.band_id = "pft_class";
        for (PftClass p : kAllPft)
          class_header.class_codes[std::string(pft_name(p))] = pft_code(p);
        write_tsr(run_dir / "reference_mode.tsr", reference, class_header);

        const RasterGrid quality = read_tsr(run_dir / "world" / "quality_fine.tsr").single();
        const FeatureSet features = load_feature_dir(run_dir / "features_fine");
        const SampleSelection samples =
            select_training_samples(reference, quality, config.classify.per_class,
                                    config.classify.quality_threshold, config.seed);
        ForestParams params;
        params.n_trees = config.classify.n_trees;
        params.tree.max_splits = config.classify.max_splits;
        params.n_threads = config.threads;
        const ClassifierResult result = train_classifier(features, samples, params, config.seed);
        write_classification_report(result, samples.shortfalls, run_dir / "cls_report.json");

        const RasterGrid classes = classify_map(result.model, features);
        write_tsr(run_dir / "classes.tsr", classes, class_header);

        const AbundanceGrid abundance = aggregate_abundance(
            classes, read_tsr(run_dir / "world" / "elevation_coarse.tsr").single().geometry());
        write_abundance(abundance, run_dir / "abundance.tsr");
      },
      {run_dir / "reference_mode.tsr", run_dir / "classes.tsr", run_dir / "abundance.tsr",
       run_dir / "cls_report.json"});

  // --- cwm -----------------------------------------------------------
  run_stage(
      "cwm", config.stages.cwm,
      [&] {
        const AbundanceGrid abundance = read_abundance(run_dir / "abundance.tsr");
        const FeatureSet features = load_feature_dir(run_dir / "features_coarse");
        const TraitTable imputed = load_trait_table(run_dir / "imputed.csv");
        const RecordIndex index(imputed);
        CwmConfig cc{config.cwm.max_km, config.cwm.k, config.cwm.min_represented};
        const CwmTrainingSet set = build_training_set(abundance, features, index, cc);
        if (set.meta.empty()) throw Error("cwm: no pixels accepted");
        write_cwm_csv(set, run_dir / "cwm.csv");
      },
      {run_dir / "cwm.csv"});

  // --- train ---------------------------------------------------------
  run_stage(
      "train", config.stages.train,
      [&] {
        const CwmTrainingSet set = load_cwm_csv(run_dir / "cwm.csv");
        fs::create_directories(run_dir / "models");
        fs::create_directories(run_dir / "eval");
        EvalProtocol protocol;
        protocol.realizations = config.train.realizations;
        protocol.cv_fraction = config.train.cv_fraction;
        protocol.inner_folds = config.train.inner_folds;
        protocol.seed = config.seed;
        protocol.n_threads = config.threads;
        protocol.sample_ids.clear();
        for (const auto& m : set.meta) protocol.sample_ids.push_back(std::to_string(m.pixel_id));

        for (Trait trait : config.train.traits) {
          const Eigen::VectorXd y = set.Y.col(static_cast<int>(trait));
          for (Method method : config.train.methods) {
            EvalReport report = evaluate_method(method, set.X, y, protocol);
            report.target_name = std::string(trait_name(trait));

            const TrainedTraitModel model = fit_final_model(
                method, set.X, y, set.feature_names, trait, config.seed, protocol.inner_folds);
            const std::string tag =
                std::string(trait_name(trait)) + "_" + std::string(method_name(method));
            save_trait_model(model, run_dir / "models" / ("model_" + tag + ".json"));

            std::vector<std::pair<std::string, double>> ranking;
            if (method == Method::RF && model.forest.has_value()) {
              const auto importance = variable_importance(*model.forest);
              for (size_t i = 0; i < importance.size(); ++i)
                ranking.emplace_back(set.feature_names[i], importance[i]);
              std::sort(ranking.begin(), ranking.end(),
                        [](const auto& a, const auto& b) { return a.second > b.second; });
            }
            std::vector<RobustnessPoint> robustness;
            if (!config.train.robustness_fractions.empty())
              robustness = robustness_curve(method, set.X, y,
                                            config.train.robustness_fractions, protocol);
            write_eval_report(report, std::string(trait_name(trait)), ranking, robustness,
                              run_dir / "eval" / ("eval_" + tag + ".json"));
          }
        }
      },
      {run_dir / "models", run_dir / "eval"});

  // --- predict -------------------------------------------------------
  run_stage(
      "predict", config.stages.predict,
      [&] {
        const FeatureSet features = load_feature_dir(run_dir / "features_coarse");
        fs::create_directories(run_dir / "maps");
        for (Trait trait : config.train.traits) {
          const std::string tag = std::string(trait_name(trait)) + "_" +
                                  std::string(method_name(config.predict_method));
          const TrainedTraitModel model =
              load_trait_model(run_dir / "models" / ("model_" + tag + ".json"));
          auto [value, stderr_grid] = predict_raster(model, features);
          write_tsr(run_dir / "maps" / ("trait_" + std::string(trait_name(trait)) + ".tsr"),
                    value, make_header(std::string(trait_name(trait))));
          write_tsr(run_dir / "maps" / ("stderr_" + std::string(trait_name(trait)) + ".tsr"),
                    stderr_grid, make_header(std::string(trait_name(trait)) + "_stderr"));
        }
      },
      {run_dir / "maps"});

  // --- report --------------------------------------------------------
  run_stage(
      "report", config.stages.report, [&] { emit_report(run_dir); }, {run_dir / "report"});

  write_manifest();
  return manifest;
}

std::vector<std::string> emit_report(const fs::path& run_dir) {
  const fs::path report_dir = run_dir / "report";
  fs::create_directories(report_dir);
  std::vector<std::string> written;

  auto note = [&](const fs::path& p) { written.push_back(fs::relative(p, run_dir).string()); };

  std::vector<PftClass> dominant;
  if (fs::exists(run_dir / "cwm.csv")) {
    const CwmTrainingSet set = load_cwm_csv(run_dir / "cwm.csv");
    dominant = dominant_pfts(set);
  }

  // Scatter pairs, residual quantiles, robustness curves per eval report.
  if (fs::is_directory(run_dir / "eval")) {
    for (const auto& entry : fs::directory_iterator(run_dir / "eval")) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      json j = json::parse(in);
      const std::string tag =
          j.at("trait").get<std::string>() + "_" + j.at("method").get<std::string>();

      const auto pred = j.at("scatter").at("pred").get<std::vector<double>>();
      const auto obs = j.at("scatter").at("obs").get<std::vector<double>>();
      const auto rows = j.at("scatter").at("rows").get<std::vector<size_t>>();
      {
        std::ofstream out(report_dir / ("scatter_" + tag + ".csv"));
        out << "predicted,observed\n";
        for (size_t i = 0; i < pred.size(); ++i) out << pred[i] << ',' << obs[i] << "\n";
        note(report_dir / ("scatter_" + tag + ".csv"));
      }
      if (!dominant.empty()) {
        std::vector<PftClass> group;
        group.reserve(rows.size());
        for (size_t r : rows) group.push_back(dominant.at(r));
        const auto stats = residuals_by_pft(pred, obs, group);
        std::ofstream out(report_dir / ("residuals_" + tag + ".csv"));
        out << "pft,n,me,rmse,q25,q50,q75\n";
        for (const auto& [pft, s] : stats)
          out << pft_name(pft) << ',' << s.n << ',' << s.me << ',' << s.rmse << ',' << s.q25
              << ',' << s.q50 << ',' << s.q75 << "\n";
        note(report_dir / ("residuals_" + tag + ".csv"));
      }
      if (j.contains("robustness")) {
        std::ofstream out(report_dir / ("robustness_" + tag + ".csv"));
        out << "fraction,r_mean,r_std,rmse_mean\n";
        for (const auto& p : j.at("robustness"))
          out << p.at("fraction").get<double>() << ',' << p.at("r_mean").get<double>() << ','
              << p.at("r_std").get<double>() << ',' << p.at("rmse_mean").get<double>() << "\n";
        note(report_dir / ("robustness_" + tag + ".csv"));
      }
    }
  }

  // Latitudinal profiles from the predicted maps.
  if (fs::is_directory(run_dir / "maps")) {
    for (const auto& entry : fs::directory_iterator(run_dir / "maps")) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("trait_", 0) != 0 || entry.path().extension() != ".tsr") continue;
      const RasterGrid map = read_tsr(entry.path()).single();
      std::vector<double> values, lats;
      for (int r = 0; r < map.height(); ++r)
        for (int c = 0; c < map.width(); ++c) {
          const double v = map.at(r, c);
          if (map.is_nodata(v)) continue;
          values.push_back(v);
          lats.push_back(map.geometry().center_y(r));
        }
      if (values.empty()) continue;
      const auto bins = latitudinal_profile(values, lats, map.geometry().pixel_size);
      const std::string trait = name.substr(6, name.size() - 10);
      std::ofstream out(report_dir / ("latitudinal_" + trait + ".csv"));
      out << "lat_lo,lat_hi,mean,count\n";
      for (const auto& b : bins)
        out << b.lat_lo << ',' << b.lat_hi << ',' << b.mean << ',' << b.count << "\n";
      note(report_dir / ("latitudinal_" + trait + ".csv"));
    }
  }

  // Compact run summary.
  json summary;
  if (fs::exists(run_dir / "gapfill_report.json")) {
    std::ifstream in(run_dir / "gapfill_report.json");
    summary["gapfill"] = json::parse(in);
  }
  if (fs::exists(run_dir / "cls_report.json")) {
    std::ifstream in(run_dir / "cls_report.json");
    json cls = json::parse(in);
    summary["classification"] = {{"overall_accuracy", cls.at("overall_accuracy")},
                                 {"kappa", cls.at("kappa")}};
  }
  if (fs::is_directory(run_dir / "eval")) {
    json evals = json::array();
    for (const auto& entry : fs::directory_iterator(run_dir / "eval")) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      json j = json::parse(in);
      evals.push_back({{"trait", j.at("trait")},
                       {"method", j.at("method")},
                       {"me", j.at("me")},
                       {"rmse", j.at("rmse")},
                       {"r_mean", j.at("r_mean")},
                       {"r_std", j.at("r_std")},
                       {"n", j.at("n")}});
    }
    summary["models"] = evals;
  }
  std::ofstream out(report_dir / "summary.json");
  out << summary.dump(2) << "\n";
  note(report_dir / "summary.json");
  return written;
}

std::vector<std::string> verify_manifest(const fs::path& run_dir) {
  std::ifstream in(run_dir / "manifest.json");
  if (!in) throw Error("missing manifest: " + (run_dir / "manifest.json").string());
  json j = json::parse(in);
  std::vector<std::string> mismatched;
  for (const auto& stage : j.at("stages")) {
    for (const auto& output : stage.at("outputs")) {
      const std::string rel = output.at("path").get<std::string>();
      const fs::path p = run_dir / rel;
      if (!fs::exists(p) || sha256_file(p) != output.at("sha256").get<std::string>())
        mismatched.push_back(rel);
    }
  }
  return mismatched;
}

}  // namespace traitscale
