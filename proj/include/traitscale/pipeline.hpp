#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "traitscale/evaluate.hpp"
#include "traitscale/gapfill.hpp"
#include "traitscale/synth.hpp"

namespace traitscale {

struct StageToggles {
  bool synth = true;
  bool gapfill = true;
  bool features = true;
  bool classify = true;
  bool cwm = true;
  bool train = true;
  bool predict = true;
  bool report = true;
};

struct ClassifyConfig {
  int per_class = 200;
  double quality_threshold = 0.85;
  int n_trees = 100;
  int max_splits = 255;
};

struct CwmStageConfig {
  double max_km = 100.0;
  int k = 10;
  double min_represented = 0.5;
};

struct TrainConfig {
  std::vector<Method> methods = {Method::RF};
  std::vector<Trait> traits = {Trait::SLA, Trait::LDMC, Trait::LNC, Trait::LPC, Trait::LNPR};
  int realizations = 20;
  double cv_fraction = 0.8;
  int inner_folds = 5;
  std::vector<double> robustness_fractions;  // empty = skip the curve
};

struct PipelineConfig {
  std::filesystem::path run_dir = "run";
  uint64_t seed = 42;
  int threads = 0;
  StageToggles stages;
  SynthConfig synth;
  int gapfill_folds = 10;
  GapfillGrid gapfill_grid = GapfillGrid::single({50, 0.1, 63});
  ClassifyConfig classify;
  CwmStageConfig cwm;
  TrainConfig train;
  Method predict_method = Method::RF;
};

/// Strict JSON config: unknown keys are rejected, values validated.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const std::string& text);
void save_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path);

struct StageRecord {
  std::string name;
  double wall_ms = 0.0;
  std::vector<std::pair<std::string, std::string>> outputs;  // path (run-dir relative), sha256
};

struct RunManifest {
  std::string version;
  uint64_t seed = 0;
  int threads = 0;
  std::string config_hash;
  std::vector<StageRecord> stages;
  std::string failed_stage;  // empty on success
};

/// Executes the enabled stages in order (synth, features, classify,
/// gapfill, cwm, train, predict, report); disabled stages must have
/// their outputs already present in run_dir. The manifest (including a
/// content hash per output file) is written to run_dir/manifest.json;
/// on a stage failure the partial manifest is written before the error
/// propagates with the stage name.
RunManifest run_pipeline(const PipelineConfig& config);

/// Writes plot-ready tabular data (scatter pairs, per-PFT residual
/// quantiles, latitudinal profiles, robustness curves) from a completed
/// run into run_dir/report.
std::vector<std::string> emit_report(const std::filesystem::path& run_dir);

/// Table-5-style evaluation document (metrics, realizations, scatter
/// pairs, importance ranking, robustness points).
void write_eval_report(const EvalReport& report, const std::string& trait_tag,
                       const std::vector<std::pair<std::string, double>>& importance_ranking,
                       const std::vector<RobustnessPoint>& robustness,
                       const std::filesystem::path& path);

/// Rehashes every file listed in run_dir/manifest.json; returns the
/// paths whose content no longer matches.
std::vector<std::string> verify_manifest(const std::filesystem::path& run_dir);

}  // namespace traitscale
