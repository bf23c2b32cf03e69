#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "traitscale/classify.hpp"
#include "traitscale/trait_table.hpp"

namespace traitscale {

/// Great-circle distance on a sphere of radius 6371.0088 km.
double haversine_km(double lat_a, double lon_a, double lat_b, double lon_b);

/// One georeferenced, PFT-assigned record with complete traits.
struct GeoRecord {
  std::string record_id;
  double lat = 0.0;
  double lon = 0.0;
  PftClass pft = PftClass::ENF;
  std::array<double, kNumTraits> traits{};
};

/// Spatial index over the usable records of an imputed table. Records
/// without coordinates or without a PFT assignment are excluded.
class RecordIndex {
 public:
  explicit RecordIndex(const TraitTable& table);

  const std::vector<GeoRecord>& records() const { return records_; }

  /// Candidate indices whose great-circle distance to (lat, lon) can be
  /// within max_km (latitude window plus a provably safe longitude
  /// window). Used as a prefilter; exact distances decide membership.
  std::vector<size_t> candidates_within(double lat, double lon, double max_km) const;

 private:
  std::vector<GeoRecord> records_;  // sorted by latitude
};

struct Neighbor {
  const GeoRecord* record = nullptr;
  double distance_km = 0.0;
};

/// Records of `pft` within max_km of the center, sorted ascending by
/// (distance, record_id), truncated to the k closest.
std::vector<Neighbor> neighbor_select(const RecordIndex& index, double lat, double lon,
                                      PftClass pft, double max_km, int k);

struct CwmConfig {
  double max_km = 100.0;
  int k = 10;
  double min_represented = 0.5;  // keep only if strictly above
};

struct CwmContribution {
  std::string record_id;
  double distance_km = 0.0;
};

/// Accepted community-weighted-mean training pixel.
struct CwmSample {
  size_t pixel_id = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::array<double, kNumPft> abundance{};
  std::array<double, kNumTraits> traits{};
  double represented_fraction = 0.0;
  std::array<std::vector<CwmContribution>, kNumVegetatedPft> contributions;
};

/// Abundance-weighted mean of per-PFT neighbor means over the vegetated
/// PFTs that have nearby records, renormalized over the represented
/// abundance. Rejected (empty) when the represented fraction does not
/// exceed config.min_represented.
std::optional<CwmSample> pixel_cwm(size_t pixel_id, double lat, double lon,
                                   const std::array<double, kNumPft>& abundance,
                                   const RecordIndex& records, const CwmConfig& config);

struct CwmTrainingSet {
  Eigen::MatrixXd X;  // samples x features
  Eigen::MatrixXd Y;  // samples x 5 traits
  std::vector<CwmSample> meta;
  std::vector<std::string> feature_names;
  size_t dropped_nodata = 0;  // accepted CWM pixels lost to nodata features
};

/// One row per accepted CWM pixel; features are the coarse FeatureSet
/// bands at that pixel. Rows with any nodata feature are dropped and
/// counted.
CwmTrainingSet build_training_set(const AbundanceGrid& abundance, const FeatureSet& features,
                                  const RecordIndex& records, const CwmConfig& config);

void write_cwm_csv(const CwmTrainingSet& set, const std::filesystem::path& path);

/// Round trip of write_cwm_csv (contributions are not persisted).
CwmTrainingSet load_cwm_csv(const std::filesystem::path& path);

/// Index of the dominant (argmax-abundance) PFT per sample row.
std::vector<PftClass> dominant_pfts(const CwmTrainingSet& set);

}  // namespace traitscale
