#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traitscale/dataset.hpp"
#include "traitscale/pft.hpp"
#include "traitscale/schema.hpp"

namespace traitscale {

/// Growth-form vocabulary. The CSV contract extends the base set
/// {tree, shrub, grass, other} with fern and crop so that excluded
/// groups can be flagged directly in the input.
enum class GrowthForm { Tree, Shrub, Grass, Fern, Crop, Other };
enum class LeafType { Needleleaf, Broadleaf, Unknown };
enum class LeafPhenology { Evergreen, Deciduous, Unknown };

std::string_view growth_form_name(GrowthForm g);
std::string_view leaf_type_name(LeafType t);
std::string_view phenology_name(LeafPhenology p);
std::optional<GrowthForm> growth_form_from_name(std::string_view s);
std::optional<LeafType> leaf_type_from_name(std::string_view s);
std::optional<LeafPhenology> phenology_from_name(std::string_view s);

inline constexpr int kNumBioclim = 19;

/// One in-situ measurement row. Missing numerics are NaN; missing
/// coordinates leave latitude/longitude empty.
struct TraitRecord {
  std::string record_id;
  std::string species;
  std::string genus;
  std::string family;
  GrowthForm growth_form = GrowthForm::Other;
  LeafType leaf_type = LeafType::Unknown;
  LeafPhenology phenology = LeafPhenology::Unknown;
  std::optional<double> latitude;
  std::optional<double> longitude;
  std::array<double, kNumBioclim> climate;  // BIO1..BIO19
  std::array<double, kNumTraits> traits;    // SLA, LDMC, LNC, LPC, LNPR

  TraitRecord() {
    climate.fill(kMissingValue);
    traits.fill(kMissingValue);
  }

  bool georeferenced() const { return latitude.has_value() && longitude.has_value(); }
  double trait(Trait t) const { return traits[static_cast<int>(t)]; }
  void set_trait(Trait t, double v) { traits[static_cast<int>(t)] = v; }
};

/// Immutable collection of trait records; operations return new tables.
class TraitTable {
 public:
  TraitTable() = default;
  explicit TraitTable(std::vector<TraitRecord> records);

  const std::vector<TraitRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  const TraitRecord& operator[](size_t i) const { return records_[i]; }

 private:
  std::vector<TraitRecord> records_;
};

/// CSV contract: UTF-8, header row
/// record_id,species,genus,family,growth_form,leaf_type,leaf_phenology,
/// lat,lon,bio1..bio19,sla,ldmc,lnc,lpc,lnpr. Empty string = missing.
TraitTable load_trait_table(const std::filesystem::path& path);
void save_trait_table(const TraitTable& table, const std::filesystem::path& path);

/// One removed cell from the outlier pass.
struct OutlierRemoval {
  std::string record_id;
  Trait trait = Trait::SLA;
  double value = 0.0;
};

/// Sets to missing every trait value farther than k population standard
/// deviations from its (species, trait) group mean. Single pass: group
/// statistics are computed once on the input. Groups with fewer than two
/// present values are untouched.
std::pair<TraitTable, std::vector<OutlierRemoval>> remove_outliers(const TraitTable& table,
                                                                   double k = 1.5);

/// Drops records whose growth form is in `excluded` (typically fern and
/// crop). Returns the filtered table and the removal count.
std::pair<TraitTable, size_t> drop_excluded_groups(const TraitTable& table,
                                                   const std::set<GrowthForm>& excluded);

/// Deterministic categorical-trait to PFT mapping; empty when the
/// categorical data is insufficient.
std::optional<PftClass> species_to_pft(const TraitRecord& record);

/// Predictor schema used by gap-filling: taxonomy and categorical
/// traits, BIO1..19, and the other four trait columns.
ColumnSchema gapfill_predictor_schema(const TraitTable& table, Trait target);

/// Materializes the predictor matrix for `target` under `schema`
/// (one row per record, NaN for missing cells).
DataTable gapfill_predictor_matrix(const TraitTable& table, Trait target,
                                   const ColumnSchema& schema);

}  // namespace traitscale
