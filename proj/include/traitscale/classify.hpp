#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "traitscale/forest.hpp"
#include "traitscale/metrics.hpp"
#include "traitscale/raster_features.hpp"

namespace traitscale {

/// Labeled pixel sample drawn from the reference map.
struct LabeledSample {
  size_t pixel = 0;  // flat index into the reference grid
  PftClass label = PftClass::ENF;
};

struct SampleSelection {
  std::vector<LabeledSample> samples;
  /// (class, qualifying-pixel count) for classes that fell short of the
  /// requested per-class count.
  std::vector<std::pair<PftClass, size_t>> shortfalls;
};

/// Uniform random sample (without replacement) of up to `per_class`
/// pixels per class among pixels with quality strictly above
/// `threshold`. Classes with no qualifying pixels produce a shortfall
/// entry, not a failure.
SampleSelection select_training_samples(const RasterGrid& reference, const RasterGrid& quality,
                                        int per_class, double threshold, uint64_t seed);

struct ClassifierResult {
  ForestModel model;
  ClassificationScores validation;  // on the held-out half
  size_t n_train = 0;
  size_t n_validation = 0;
};

/// Bagged classification forest over the feature bands at the sampled
/// pixels; trained on a class-stratified 50% split and scored on the
/// other half.
ClassifierResult train_classifier(const FeatureSet& features, const SampleSelection& samples,
                                  const ForestParams& params, uint64_t seed);

/// Per-pixel classification (codes 1..7); pixels with every feature
/// missing become nodata.
RasterGrid classify_map(const ForestModel& model, const FeatureSet& features);

/// Per-coarse-pixel PFT composition aggregated from a fine class map.
struct AbundanceGrid {
  RasterGeometry geometry;
  /// fractions[pixel][pft_index]; all-NaN row = nodata cell.
  std::vector<std::array<double, kNumPft>> fractions;

  bool valid(size_t pixel) const { return !std::isnan(fractions[pixel][0]); }
};

/// Requires the coarse pixel size to be an exact integer multiple of the
/// fine pixel size with aligned origins. Fractions are over the valid
/// fine pixels of each footprint and sum to 1; footprints with no valid
/// fine pixel are nodata.
AbundanceGrid aggregate_abundance(const RasterGrid& fine_classes,
                                  const RasterGeometry& coarse_geometry);

void write_abundance(const AbundanceGrid& grid, const std::filesystem::path& path);
AbundanceGrid read_abundance(const std::filesystem::path& path);

void write_classification_report(const ClassifierResult& result,
                                 const std::vector<std::pair<PftClass, size_t>>& shortfalls,
                                 const std::filesystem::path& path);

}  // namespace traitscale
