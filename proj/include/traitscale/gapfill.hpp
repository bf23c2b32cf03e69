#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "traitscale/forest.hpp"
#include "traitscale/metrics.hpp"
#include "traitscale/trait_table.hpp"

namespace traitscale {

/// One boosted-forest hyperparameter combination (the three tuned
/// parameters: tree count, learning rate, split budget).
struct ForestHyper {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_splits = 63;
};

struct GapfillGrid {
  std::vector<ForestHyper> points;

  /// n_trees {50,100,200} x learning_rate {0.05,0.1,0.3} x
  /// max_splits {15,63,255}.
  static GapfillGrid defaults();
  static GapfillGrid single(const ForestHyper& h) { return GapfillGrid{{h}}; }
};

/// Table-3-style per-trait summary of the cross-validated imputation.
struct GapfillReport {
  Trait trait = Trait::SLA;
  double me = 0.0;
  double rmse = 0.0;
  std::optional<double> r;
  size_t n_samples = 0;        // observed cells before imputation
  double missing_fraction = 0; // before imputation
  double mean_value = 0.0;     // mean of observed cells
  ForestHyper chosen;
};

enum class CellProvenance : uint8_t { Observed = 0, Imputed = 1 };

struct ImputedTable {
  TraitTable table;
  /// provenance[record][trait]
  std::vector<std::array<uint8_t, kNumTraits>> provenance;
};

/// Imputes one trait: k-fold CV over the observed cells selects the grid
/// point with the lowest pooled RMSE, the winner is refit on all
/// observed cells, and missing cells receive its predictions. Folds are
/// keyed by a hash of record_id and seed, so row order cannot change
/// results. Observed cells are never modified.
std::pair<TraitTable, GapfillReport> gapfill_trait(const TraitTable& table, Trait trait,
                                                   const GapfillGrid& grid, int folds,
                                                   uint64_t seed, int n_threads = 0);

/// Imputes every trait in descending-availability order (SLA, LDMC, LNC,
/// LPC, LNPR); later traits may use earlier imputed columns as
/// predictors.
std::pair<ImputedTable, std::vector<GapfillReport>> gapfill_all(const TraitTable& table,
                                                                const GapfillGrid& grid,
                                                                int folds, uint64_t seed,
                                                                int n_threads = 0);

void write_gapfill_reports(const std::vector<GapfillReport>& reports,
                           const std::filesystem::path& path);

}  // namespace traitscale
