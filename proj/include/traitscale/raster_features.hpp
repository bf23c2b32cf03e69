#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "traitscale/raster.hpp"

namespace traitscale {

/// One scene: a band at one date plus its QA mask (1 = usable).
struct Scene {
  std::string band_id;
  int year = 0;
  int month = 0;
  int day = 1;
  RasterGrid values;
  RasterGrid qa;
};

/// All scenes of a run share one geometry; QA masks are same-shape.
struct TimeStack {
  std::vector<Scene> scenes;

  void add(Scene scene);
  const RasterGeometry& geometry() const;
  bool empty() const { return scenes.empty(); }
};

/// Scans a directory for `<band>_<YYYY-MM-DD>.tsr` scenes with
/// `<band>_<YYYY-MM-DD>_qa.tsr` masks.
TimeStack load_time_stack(const std::filesystem::path& dir);

/// Per pixel and calendar month, the median of QA-valid observations
/// across all years in [year_lo, year_hi]; empty months become nodata.
/// Returns 12 grids indexed by month-1.
std::vector<RasterGrid> monthly_median_composite(const TimeStack& stack,
                                                 const std::string& band_id, int year_lo,
                                                 int year_hi);

enum class VegIndex { NDVI, EVI, NDWI };

std::string_view veg_index_name(VegIndex v);

/// NDVI = (nir-red)/(nir+red); EVI = 2.5(nir-red)/(nir+6red-7.5blue+1);
/// NDWI = (nir-swir)/(nir+swir). blue is only read for EVI, swir only
/// for NDWI. Near-zero denominators and any nodata input give nodata.
RasterGrid vegetation_index(const RasterGrid& red, const RasterGrid& nir,
                            const RasterGrid* blue, const RasterGrid* swir, VegIndex which);

struct AnnualSummary {
  RasterGrid max;
  RasterGrid min;
  RasterGrid std;  // population convention; nodata under 2 valid months
  RasterGrid sum;
};

/// Per-pixel max/min/population-std/sum over the valid months of a
/// 12-grid monthly series.
AnnualSummary annual_summary(const std::vector<RasterGrid>& monthlies);

/// Per-pixel modal class over years; ties break to the lowest class
/// code; nodata years are ignored.
RasterGrid mode_composite(const std::vector<RasterGrid>& yearly_classes);

/// Bilinear interpolation of a continuous-valued source at the target's
/// pixel centers. Output pixels whose four surrounding source centers
/// are not all valid (or that fall outside the source center hull)
/// become nodata.
RasterGrid bilinear_resample(const RasterGrid& src, const RasterGeometry& target);

/// Per-feature z-scoring. When stats is empty they are computed from the
/// rows of X (population std); zero-variance features map to 0 and are
/// flagged. The returned stats reproduce the transform on new rows.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<uint8_t> zero_variance;
};

FeatureStats standardize_features(Eigen::MatrixXd& X,
                                  const std::optional<FeatureStats>& stats = std::nullopt);

/// Named single-band rasters on a shared grid (the Table-2-style summary
/// features plus climate and elevation layers).
struct FeatureSet {
  std::vector<std::string> names;
  std::vector<RasterGrid> bands;

  const RasterGrid& band(const std::string& name) const;
  bool has(const std::string& name) const;
  void add(std::string name, RasterGrid grid);
  const RasterGeometry& geometry() const;
  /// Feature row for one pixel, NaN where a band is nodata.
  std::vector<double> pixel_row(size_t flat_index) const;
};

/// Configuration for the feature stage (`features.cfg`).
struct FeatureConfig {
  std::filesystem::path stack_dir;
  std::vector<std::string> reflectance_bands;  // band ids to median-composite
  std::string red_band, nir_band, blue_band, swir_band;
  std::string lst_band;  // empty = LST not supplied
  std::filesystem::path elevation_path;
  std::vector<std::filesystem::path> extra_rasters;  // e.g. bio1..bio19
  int year_lo = 0, year_hi = 9999;
  std::filesystem::path out_dir;
};

FeatureConfig load_feature_config(const std::filesystem::path& path);
void save_feature_config(const FeatureConfig& cfg, const std::filesystem::path& path);

/// Builds the summary feature set: <band>med medians, VI max/min/std/sum
/// for NDVI/EVI/NDWI, the same four LST summaries when an LST band is
/// supplied, elevation, and any extra rasters verbatim.
FeatureSet build_features(const TimeStack& stack, const FeatureConfig& cfg);

void write_feature_dir(const FeatureSet& features, const std::filesystem::path& dir);
FeatureSet load_feature_dir(const std::filesystem::path& dir);

}  // namespace traitscale
