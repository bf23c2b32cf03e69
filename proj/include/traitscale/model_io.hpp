#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "traitscale/evaluate.hpp"
#include "traitscale/forest.hpp"
#include "traitscale/raster_features.hpp"
#include "traitscale/regress.hpp"

namespace traitscale {

/// A deployable trait model: one fitted method plus the feature order
/// and standardization statistics needed to reproduce its inputs.
struct TrainedTraitModel {
  Method method = Method::RF;
  Trait trait = Trait::SLA;
  std::vector<std::string> feature_names;
  FeatureStats stats;
  std::string hyper_desc;

  std::optional<ForestModel> forest;
  std::optional<LinearModel> linear;
  std::optional<ElmModel> elm;
  std::optional<KernelModel> kernel;
};

/// Hyperparameter selection as in evaluate_method, then a final fit on
/// all rows. RF keeps surrogate splits so trait maps stay predictable
/// under missing features.
TrainedTraitModel fit_final_model(Method method, const Eigen::MatrixXd& X_raw,
                                  const Eigen::VectorXd& y,
                                  const std::vector<std::string>& feature_names, Trait trait,
                                  uint64_t seed, int inner_folds = 5);

struct TraitPrediction {
  double value = 0.0;
  double stderr_value = 0.0;  // per-tree std (RF), posterior std (GPR), else 0
  bool valid = false;
};

/// Predicts one raw (unstandardized) feature row. Missing features are
/// routed by surrogates for RF; other methods return invalid.
TraitPrediction predict_trait(const TrainedTraitModel& model, std::span<const double> raw_row);

void save_trait_model(const TrainedTraitModel& model, const std::filesystem::path& path);
TrainedTraitModel load_trait_model(const std::filesystem::path& path);

/// Applies the model over a feature directory, producing the trait map
/// and its predictive-stderr companion.
std::pair<RasterGrid, RasterGrid> predict_raster(const TrainedTraitModel& model,
                                                 const FeatureSet& features);

}  // namespace traitscale
