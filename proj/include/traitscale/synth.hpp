#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "traitscale/pft.hpp"
#include "traitscale/raster.hpp"

namespace traitscale {

/// Per-PFT leaf-level trait means and standard deviations used by the
/// synthetic record generator (vegetated PFTs only, trait order SLA,
/// LDMC, LNC, LPC, LNPR).
extern const std::array<std::array<double, kNumTraits>, kNumVegetatedPft> kPftTraitMean;
extern const std::array<std::array<double, kNumTraits>, kNumVegetatedPft> kPftTraitStd;

struct SynthConfig {
  int fine_width = 64;
  int fine_height = 64;
  int coarse_ratio = 16;  // fine pixels per coarse pixel side
  double origin_lat = 46.0;
  double origin_lon = 8.0;
  double fine_pixel_deg = 0.002;

  int year_lo = 2001;
  int year_hi = 2003;
  int reference_years = 3;
  double reference_noise = 0.02;  // per-year label flip fraction

  int n_records = 2000;
  std::array<double, kNumTraits> missing_fraction = {0.47, 0.45, 0.68, 0.74, 0.84};
  double georef_fraction = 1.0;
  int species_per_pft = 8;
  /// Trait variance shares: species effects, shared climate driver; the
  /// remainder is i.i.d. noise.
  double species_var_frac = 0.65;
  double climate_var_frac = 0.30;

  double qa_invalid_fraction = 0.2;
  double reflectance_noise = 0.01;

  std::filesystem::path out_dir = "world";
};

struct SyntheticWorld {
  std::filesystem::path dir;
  RasterGeometry fine_geometry;
  RasterGeometry coarse_geometry;
  size_t n_records_written = 0;
  std::vector<std::string> files;
};

/// Generates the full desk-scale input set: fine PFT truth and noisy
/// yearly reference maps, fine/coarse imagery stacks with QA masks,
/// elevation, BIO1..19 climate surfaces (at a coarser source grid for
/// bilinear resampling), the quality band, and a trait record table
/// with induced missingness. Bit-identical for a fixed (config, seed).
SyntheticWorld synth_world(const SynthConfig& config, uint64_t seed);

}  // namespace traitscale
