// traitscale: command-line pipeline for upscaling in-situ leaf traits to
// gridded maps. Subcommands cover synthetic-world generation, gap
// filling, raster feature extraction, PFT classification/aggregation,
// community-weighted-mean construction, model training/evaluation,
// prediction, full pipeline runs, and report emission.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "traitscale/classify.hpp"
#include "traitscale/cwm.hpp"
#include "traitscale/error.hpp"
#include "traitscale/gapfill.hpp"
#include "traitscale/model_io.hpp"
#include "traitscale/pipeline.hpp"
#include "traitscale/raster_features.hpp"
#include "traitscale/sha256.hpp"

namespace fs = std::filesystem;
using namespace traitscale;

namespace {

int run_synth(const std::string& config_path, const std::string& out_dir, uint64_t seed) {
  SynthConfig config;
  if (!config_path.empty()) {
    const PipelineConfig pc = load_pipeline_config(config_path);
    config = pc.synth;
    if (seed == 0) seed = pc.seed;
  }
  if (!out_dir.empty()) config.out_dir = out_dir;
  const SyntheticWorld world = synth_world(config, seed);
  std::cout << "synth: wrote " << world.files.size() << " top-level outputs under "
            << world.dir.string() << " (" << world.n_records_written << " records)\n";
  return 0;
}

int run_gapfill(const std::string& in_path, const std::string& out_path,
                const std::string& report_path, uint64_t seed, int folds,
                const std::string& grid_spec, int threads) {
  const TraitTable raw = load_trait_table(in_path);
  auto [cleaned, removed] = remove_outliers(raw, 1.5);
  auto [kept, dropped] = drop_excluded_groups(cleaned, {GrowthForm::Fern, GrowthForm::Crop});
  std::cout << "gapfill: " << raw.size() << " records, " << removed.size()
            << " outlier cells removed, " << dropped << " fern/crop records dropped\n";

  GapfillGrid grid = grid_spec == "full" ? GapfillGrid::defaults()
                                         : GapfillGrid::single({50, 0.1, 63});
  auto [imputed, reports] = gapfill_all(kept, grid, folds, seed, threads);
  save_trait_table(imputed.table, out_path);
  if (!report_path.empty()) write_gapfill_reports(reports, report_path);
  for (const auto& r : reports)
    std::cout << "  " << trait_name(r.trait) << ": n=" << r.n_samples
              << " missing=" << 100.0 * r.missing_fraction << "% cv_rmse=" << r.rmse
              << " cv_r=" << (r.r ? *r.r : 0.0) << "\n";
  return 0;
}

int run_features(const std::string& config_path) {
  const FeatureConfig config = load_feature_config(config_path);
  const TimeStack stack = load_time_stack(config.stack_dir);
  const FeatureSet features = build_features(stack, config);
  write_feature_dir(features, config.out_dir);
  std::cout << "features: wrote " << features.names.size() << " bands to "
            << config.out_dir.string() << "\n";
  return 0;
}

int run_cwm(const std::string& abundance_path, const std::string& records_path,
            const std::string& features_dir, const std::string& out_path, double max_km,
            int k) {
  const AbundanceGrid abundance = read_abundance(abundance_path);
  const FeatureSet features = load_feature_dir(features_dir);
  const TraitTable records = load_trait_table(records_path);
  const RecordIndex index(records);
  CwmConfig config;
  config.max_km = max_km;
  config.k = k;
  const CwmTrainingSet set = build_training_set(abundance, features, index, config);
  write_cwm_csv(set, out_path);
  std::cout << "cwm: " << set.meta.size() << " pixels accepted, " << set.dropped_nodata
            << " dropped for nodata features\n";
  return 0;
}

int run_train(const std::string& cwm_path, const std::string& method_name_arg,
              const std::string& trait_name_arg, const std::string& model_path,
              const std::string& report_path, uint64_t seed, int realizations, int threads) {
  const auto method = method_from_name(method_name_arg);
  if (!method) throw Error("unknown method: " + method_name_arg);
  const auto trait = trait_from_name(trait_name_arg);
  if (!trait) throw Error("unknown trait: " + trait_name_arg);

  const CwmTrainingSet set = load_cwm_csv(cwm_path);
  const Eigen::VectorXd y = set.Y.col(static_cast<int>(*trait));

  EvalProtocol protocol;
  protocol.realizations = realizations;
  protocol.seed = seed;
  protocol.n_threads = threads;
  for (const auto& m : set.meta) protocol.sample_ids.push_back(std::to_string(m.pixel_id));

  EvalReport report = evaluate_method(*method, set.X, y, protocol);
  report.target_name = trait_name_arg;
  std::cout << "train: " << method_name_arg << "/" << trait_name_arg << " n=" << report.n
            << " R=" << report.r_mean << "+-" << report.r_std << " RMSE=" << report.rmse_mean
            << "\n";

  const TrainedTraitModel model =
      fit_final_model(*method, set.X, y, set.feature_names, *trait, seed);
  save_trait_model(model, model_path);

  if (!report_path.empty()) {
    std::vector<std::pair<std::string, double>> ranking;
    if (*method == Method::RF && model.forest.has_value()) {
      const auto importance = variable_importance(*model.forest);
      for (size_t i = 0; i < importance.size(); ++i)
        ranking.emplace_back(set.feature_names[i], importance[i]);
      std::sort(ranking.begin(), ranking.end(),
                [](const auto& a, const auto& b) { return a.second > b.second; });
    }
    write_eval_report(report, trait_name_arg, ranking, {}, report_path);
  }
  return 0;
}

int run_predict(const std::string& model_path, const std::string& features_dir,
                const std::string& out_path, const std::string& stderr_path) {
  const TrainedTraitModel model = load_trait_model(model_path);
  const FeatureSet features = load_feature_dir(features_dir);
  auto [value, stderr_grid] = predict_raster(model, features);
  write_tsr(out_path, value, make_header(std::string(trait_name(model.trait))));
  if (!stderr_path.empty())
    write_tsr(stderr_path, stderr_grid,
              make_header(std::string(trait_name(model.trait)) + "_stderr"));
  std::cout << "predict: wrote " << out_path << "\n";
  return 0;
}

int run_evaluate(const std::string& cwm_path, const std::string& trait_name_arg,
                 const std::string& methods_arg, const std::string& report_path,
                 const std::string& robustness_arg, uint64_t seed, int realizations,
                 int threads) {
  const auto trait = trait_from_name(trait_name_arg);
  if (!trait) throw Error("unknown trait: " + trait_name_arg);
  const CwmTrainingSet set = load_cwm_csv(cwm_path);
  const Eigen::VectorXd y = set.Y.col(static_cast<int>(*trait));

  std::vector<Method> methods;
  if (methods_arg == "all") {
    methods.assign(kAllMethods.begin(), kAllMethods.end());
  } else {
    std::stringstream ss(methods_arg);
    std::string token;
    while (std::getline(ss, token, ',')) {
      const auto m = method_from_name(token);
      if (!m) throw Error("unknown method: " + token);
      methods.push_back(*m);
    }
  }
  std::vector<double> fractions;
  if (!robustness_arg.empty()) {
    std::stringstream ss(robustness_arg);
    std::string token;
    while (std::getline(ss, token, ',')) fractions.push_back(std::stod(token));
  }

  EvalProtocol protocol;
  protocol.realizations = realizations;
  protocol.seed = seed;
  protocol.n_threads = threads;
  for (const auto& m : set.meta) protocol.sample_ids.push_back(std::to_string(m.pixel_id));

  nlohmann::json out = nlohmann::json::array();
  for (Method method : methods) {
    const EvalReport report = evaluate_method(method, set.X, y, protocol);
    nlohmann::json j = {{"method", std::string(method_name(method))},
                        {"trait", trait_name_arg},
                        {"me", report.me_mean},
                        {"rmse", report.rmse_mean},
                        {"r_mean", report.r_mean},
                        {"r_std", report.r_std},
                        {"n", report.n}};
    if (!fractions.empty()) {
      const auto curve = robustness_curve(method, set.X, y, fractions, protocol);
      nlohmann::json rb = nlohmann::json::array();
      for (const auto& p : curve)
        rb.push_back({{"fraction", p.fraction},
                      {"r_mean", p.r_mean},
                      {"r_std", p.r_std},
                      {"rmse_mean", p.rmse_mean}});
      j["robustness"] = rb;
    }
    std::cout << "evaluate: " << method_name(method) << " R=" << report.r_mean << "+-"
              << report.r_std << " RMSE=" << report.rmse_mean << "\n";
    out.push_back(j);
  }
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << out.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traitscale: leaf-trait upscaling pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic desk-scale world");
  std::string synth_config, synth_out = "world";
  uint64_t synth_seed = 42;
  synth->add_option("--config", synth_config, "pipeline config supplying the synth block");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--seed", synth_seed, "random seed");

  // gapfill
  auto* gapfill = app.add_subcommand("gapfill", "impute missing trait cells");
  std::string gf_in, gf_out, gf_report;
  uint64_t gf_seed = 42;
  int gf_folds = 10, gf_threads = 0;
  std::string gf_grid = "small";
  gapfill->add_option("--in", gf_in, "input trait table csv")->required();
  gapfill->add_option("--out", gf_out, "imputed table csv")->required();
  gapfill->add_option("--report", gf_report, "gap-fill report json");
  gapfill->add_option("--seed", gf_seed, "random seed");
  gapfill->add_option("--folds", gf_folds, "cross-validation folds");
  gapfill->add_option("--grid", gf_grid, "hyperparameter grid: small|full");
  gapfill->add_option("--threads", gf_threads, "worker threads (0 = auto)");

  // features
  auto* features = app.add_subcommand("features", "build summary feature rasters");
  std::string feat_config;
  features->add_option("--config", feat_config, "features config json")->required();

  // classify
  auto* classify = app.add_subcommand("classify", "train PFT classifier and map classes");
  std::string cls_features, cls_reference, cls_quality, cls_out, cls_report;
  std::string cls_coarse_like, cls_abundance;
  uint64_t cls_seed = 42;
  int cls_per_class = 200, cls_trees = 100;
  double cls_threshold = 0.85;
  classify->add_option("--features", cls_features, "fine feature directory")->required();
  classify->add_option("--reference", cls_reference, "reference class raster")->required();
  classify->add_option("--quality", cls_quality, "quality raster")->required();
  classify->add_option("--out", cls_out, "output class raster")->required();
  classify->add_option("--abundance", cls_abundance, "output abundance raster");
  classify->add_option("--coarse-like", cls_coarse_like,
                       "raster whose geometry defines the coarse grid");
  classify->add_option("--report", cls_report, "confusion/kappa report json");
  classify->add_option("--seed", cls_seed, "random seed");
  classify->add_option("--per-class", cls_per_class, "training pixels per class");
  classify->add_option("--quality-threshold", cls_threshold, "minimum quality (exclusive)");
  classify->add_option("--n-trees", cls_trees, "forest size");

  // cwm
  auto* cwm = app.add_subcommand("cwm", "build community-weighted-mean training samples");
  std::string cwm_abundance, cwm_records, cwm_features, cwm_out;
  double cwm_max_km = 100.0;
  int cwm_k = 10;
  cwm->add_option("--abundance", cwm_abundance, "abundance raster")->required();
  cwm->add_option("--records", cwm_records, "imputed trait table csv")->required();
  cwm->add_option("--features", cwm_features, "coarse feature directory")->required();
  cwm->add_option("--out", cwm_out, "output cwm csv")->required();
  cwm->add_option("--max-km", cwm_max_km, "neighbor distance threshold (km)");
  cwm->add_option("--k", cwm_k, "neighbor count");

  // train
  auto* train = app.add_subcommand("train", "fit and evaluate one trait model");
  std::string tr_cwm, tr_method = "rf", tr_trait = "sla", tr_model, tr_report;
  uint64_t tr_seed = 42;
  int tr_realizations = 20, tr_threads = 0;
  train->add_option("--cwm", tr_cwm, "cwm csv")->required();
  train->add_option("--method", tr_method, "rlr|rf|elm|krr|gpr");
  train->add_option("--trait", tr_trait, "sla|ldmc|lnc|lpc|lnpr");
  train->add_option("--out", tr_model, "model output path")->required();
  train->add_option("--report", tr_report, "evaluation report json");
  train->add_option("--seed", tr_seed, "random seed");
  train->add_option("--realizations", tr_realizations, "protocol realizations");
  train->add_option("--threads", tr_threads, "worker threads (0 = auto)");

  // predict
  auto* predict = app.add_subcommand("predict", "apply a trait model over features");
  std::string pr_model, pr_features, pr_out, pr_stderr;
  predict->add_option("--model", pr_model, "trained model path")->required();
  predict->add_option("--features", pr_features, "feature directory")->required();
  predict->add_option("--out", pr_out, "trait raster")->required();
  predict->add_option("--stderr", pr_stderr, "predictive standard error raster");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "compare regression methods on a cwm set");
  std::string ev_cwm, ev_trait = "sla", ev_methods = "all", ev_report, ev_robustness;
  uint64_t ev_seed = 42;
  int ev_realizations = 20, ev_threads = 0;
  evaluate->add_option("--cwm", ev_cwm, "cwm csv")->required();
  evaluate->add_option("--trait", ev_trait, "trait tag");
  evaluate->add_option("--methods", ev_methods, "comma list or 'all'");
  evaluate->add_option("--report", ev_report, "comparison report json");
  evaluate->add_option("--robustness", ev_robustness, "comma list of training fractions");
  evaluate->add_option("--seed", ev_seed, "random seed");
  evaluate->add_option("--realizations", ev_realizations, "protocol realizations");
  evaluate->add_option("--threads", ev_threads, "worker threads (0 = auto)");

  // run
  auto* run = app.add_subcommand("run", "execute the full pipeline from a config");
  std::string run_config;
  run->add_option("--config", run_config, "pipeline config json")->required();

  // report
  auto* report = app.add_subcommand("report", "emit plot data from a completed run");
  std::string rp_dir;
  report->add_option("--run", rp_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return run_synth(synth_config, synth_out, synth_seed);
    if (gapfill->parsed())
      return run_gapfill(gf_in, gf_out, gf_report, gf_seed, gf_folds, gf_grid, gf_threads);
    if (features->parsed()) return run_features(feat_config);
    if (classify->parsed()) {
      const FeatureSet fset = load_feature_dir(cls_features);
      const RasterGrid reference = read_tsr(cls_reference).single();
      const RasterGrid quality = read_tsr(cls_quality).single();
      const SampleSelection samples = select_training_samples(
          reference, quality, cls_per_class, cls_threshold, cls_seed);
      for (const auto& [pft, n] : samples.shortfalls)
        std::cerr << "classify: class " << pft_name(pft) << " has only " << n
                  << " qualifying pixels\n";
      ForestParams params;
      params.n_trees = cls_trees;
      const ClassifierResult result = train_classifier(fset, samples, params, cls_seed);
      std::cout << "classify: validation accuracy=" << result.validation.overall_accuracy
                << " kappa=" << (result.validation.kappa ? *result.validation.kappa : 0.0)
                << "\n";
      if (!cls_report.empty())
        write_classification_report(result, samples.shortfalls, cls_report);
      TsrHeader class_header;
      class_header.band_id = "pft_class";
      for (PftClass p : kAllPft)
        class_header.class_codes[std::string(pft_name(p))] = pft_code(p);
      const RasterGrid classes = classify_map(result.model, fset);
      write_tsr(cls_out, classes, class_header);
      if (!cls_abundance.empty()) {
        if (cls_coarse_like.empty())
          throw Error("classify: --abundance requires --coarse-like");
        const RasterGeometry coarse = read_tsr(cls_coarse_like).single().geometry();
        write_abundance(aggregate_abundance(classes, coarse), cls_abundance);
      }
      return 0;
    }
    if (cwm->parsed())
      return run_cwm(cwm_abundance, cwm_records, cwm_features, cwm_out, cwm_max_km, cwm_k);
    if (train->parsed())
      return run_train(tr_cwm, tr_method, tr_trait, tr_model, tr_report, tr_seed,
                       tr_realizations, tr_threads);
    if (predict->parsed()) return run_predict(pr_model, pr_features, pr_out, pr_stderr);
    if (evaluate->parsed())
      return run_evaluate(ev_cwm, ev_trait, ev_methods, ev_report, ev_robustness, ev_seed,
                          ev_realizations, ev_threads);
    if (run->parsed()) {
      const PipelineConfig config = load_pipeline_config(run_config);
      const RunManifest manifest = run_pipeline(config);
      std::cout << "run: completed " << manifest.stages.size() << " stages under "
                << config.run_dir.string() << "\n";
      return 0;
    }
    if (report->parsed()) {
      const auto files = emit_report(rp_dir);
      std::cout << "report: wrote " << files.size() << " files\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
