#include "traitscale/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "traitscale/error.hpp"
#include "traitscale/raster_features.hpp"
#include "traitscale/rng.hpp"
#include "traitscale/trait_table.hpp"

namespace traitscale {

// Leaf-level reference statistics per vegetated PFT (ENF..GRL), trait
// order SLA, LDMC, LNC, LPC, LNPR.
const std::array<std::array<double, kNumTraits>, kNumVegetatedPft> kPftTraitMean = {{
    {4.82, 0.31, 12.18, 1.15, 9.48},    // ENF
    {12.07, 0.34, 18.82, 0.70, 19.10},  // EBF
    {9.19, 0.28, 20.01, 1.86, 10.18},   // DNF
    {18.57, 0.33, 22.78, 1.40, 14.20},  // DBF
    {14.54, 0.29, 17.56, 1.11, 15.29},  // SHL
    {20.97, 0.26, 20.52, 1.28, 11.88},  // GRL
}};

const std::array<std::array<double, kNumTraits>, kNumVegetatedPft> kPftTraitStd = {{
    {2.67, 0.10, 2.47, 0.36, 2.03},
    {5.15, 0.06, 5.85, 0.30, 4.48},
    {2.85, 0.06, 3.24, 0.40, 2.77},
    {8.38, 0.06, 4.82, 0.52, 4.34},
    {7.46, 0.06, 7.15, 0.53, 5.30},
    {8.58, 0.07, 7.81, 0.58, 5.60},
}};

namespace {

constexpr std::array<const char*, 7> kBands = {"B1", "B2", "B3", "B4", "B5", "B7", "LST"};

/// Per-PFT spectral character: canopy greenness, background brightness,
/// seasonal amplitude.
struct PftSignature {
  double green;
  double bright;
  double seasonal;
};

constexpr std::array<PftSignature, kNumPft> kSignatures = {{
    {0.60, 0.06, 0.10},  // ENF
    {0.90, 0.05, 0.05},  // EBF
    {0.50, 0.07, 0.60},  // DNF
    {0.80, 0.06, 0.55},  // DBF
    {0.40, 0.12, 0.30},  // SHL
    {0.55, 0.10, 0.50},  // GRL
    {0.05, 0.30, 0.00},  // BARREN
}};

double band_value(int pft_idx, int band, int month, double texture) {
  const PftSignature& s = kSignatures[static_cast<size_t>(pft_idx)];
  // seasonal greenness peaks in July
  const double season = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (month - 7) / 12.0);
  const double green = s.green * (1.0 - s.seasonal * season);
  const double br = s.bright + texture;
  switch (band) {
    case 0: return br * 0.8 + 0.02 * (1.0 - green);                 // blue
    case 1: return br + 0.05 * green + 0.02;                        // green band
    case 2: return br + 0.12 * (1.0 - green) + 0.01;                // red
    case 3: return br + 0.45 * green + 0.05;                        // nir
    case 4: return br + 0.20 * (1.0 - green) + 0.08 * green + 0.04; // swir1
    case 5: return br + 0.16 * (1.0 - green) + 0.02;                // swir2
    case 6: return 278.0 + 30.0 * (1.0 - green) * season + 8.0 * (1.0 - green);  // LST (K)
  }
  return 0.0;
}

/// Bioclimatic surface: latitudinal gradient plus a mild longitudinal
/// wiggle, deterministic in (lat, lon).
double bio_value(int k, double lat, double lon, double lat_min, double lat_span,
                 double lon_min, double lon_span) {
  const double t = (lat - lat_min) / lat_span;                 // 0..1 south->north
  const double u = (lon - lon_min) / std::max(lon_span, 1e-9); // 0..1 west->east
  const bool temperature = k < 11;
  const double base = temperature ? 22.0 - 2.0 * k : 1400.0 - 120.0 * (k - 11);
  const double range = temperature ? -14.0 : -600.0;
  const double wiggle = temperature ? 1.5 : 80.0;
  return base + range * t + wiggle * std::sin(2.0 * std::numbers::pi * (u + 0.13 * k));
}

double elevation_value(double lat, double lon) {
  return 600.0 + 350.0 * std::sin(lat * 55.0) * std::cos(lon * 40.0) + 20.0 * (lon - 8.0);
}

/// Smooth random field: low-res seeded grid bilinearly upsampled.
RasterGrid smooth_noise(const RasterGeometry& geom, int cells, RngStream& rng) {
  RasterGeometry low;
  low.width = cells;
  low.height = cells;
  low.pixel_size = std::max(geom.width, geom.height) * geom.pixel_size / (cells - 2);
  low.origin_x = geom.origin_x - low.pixel_size;
  low.origin_y = geom.origin_y + low.pixel_size;
  low.crs_tag = geom.crs_tag;
  RasterGrid field(low);
  for (size_t i = 0; i < field.size(); ++i) field.set_flat(i, rng.next_normal());
  return bilinear_resample(field, geom);
}

}  // namespace

SyntheticWorld synth_world(const SynthConfig& config, uint64_t seed) {
  namespace fs = std::filesystem;
  SyntheticWorld world;
  world.dir = config.out_dir;
  fs::create_directories(config.out_dir);

  const double fine_px = config.fine_pixel_deg;
  RasterGeometry fine;
  fine.width = config.fine_width;
  fine.height = config.fine_height;
  fine.pixel_size = fine_px;
  fine.origin_x = config.origin_lon;
  fine.origin_y = config.origin_lat;
  fine.crs_tag = "latlon-synthetic";
  if (fine.width % config.coarse_ratio != 0 || fine.height % config.coarse_ratio != 0)
    throw Error("synth_world: fine size must be divisible by coarse_ratio");

  RasterGeometry coarse = fine;
  coarse.width = fine.width / config.coarse_ratio;
  coarse.height = fine.height / config.coarse_ratio;
  coarse.pixel_size = fine_px * config.coarse_ratio;
  world.fine_geometry = fine;
  world.coarse_geometry = coarse;

  const double lat_min = fine.origin_y - fine.height * fine_px;
  const double lat_span = fine.height * fine_px;
  const double lon_min = fine.origin_x;
  const double lon_span = fine.width * fine_px;

  auto track = [&world](const fs::path& p) { world.files.push_back(p.filename().string()); };

  // --- PFT truth map: argmax over per-class smooth fields -------------
  RasterGrid truth(fine);
  {
    std::array<RasterGrid, kNumPft> fields = {
        RasterGrid(fine), RasterGrid(fine), RasterGrid(fine), RasterGrid(fine),
        RasterGrid(fine), RasterGrid(fine), RasterGrid(fine)};
    for (int k = 0; k < kNumPft; ++k) {
      RngStream rng = RngStream::derive(seed, 100 + static_cast<uint64_t>(k));
      fields[static_cast<size_t>(k)] = smooth_noise(fine, 7, rng);
    }
    for (size_t i = 0; i < truth.size(); ++i) {
      int best = 0;
      double best_v = -1e30;
      for (int k = 0; k < kNumPft; ++k) {
        // keep barren rarer than vegetation
        const double bias = k == pft_index(PftClass::BARREN) ? -0.35 : 0.0;
        const double v = fields[static_cast<size_t>(k)][i] + bias;
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      truth.set_flat(i, static_cast<double>(best + 1));
    }
  }
  TsrHeader class_header;
  class_header.band_id = "pft_class";
  for (PftClass p : kAllPft) class_header.class_codes[std::string(pft_name(p))] = pft_code(p);
  write_tsr(config.out_dir / "truth_pft_fine.tsr", truth, class_header);
  track("truth_pft_fine.tsr");

  // --- Noisy yearly reference maps (mode-composited downstream) -------
  for (int y = 0; y < config.reference_years; ++y) {
    RngStream rng = RngStream::derive(seed, 200 + static_cast<uint64_t>(y));
    RasterGrid ref = truth;
    for (size_t i = 0; i < ref.size(); ++i) {
      if (rng.next_double() < config.reference_noise)
        ref.set_flat(i, static_cast<double>(1 + rng.next_below(kNumPft)));
    }
    TsrHeader h = class_header;
    h.timestamp = std::to_string(config.year_lo + y) + "-01-01";
    const std::string name = "reference_" + std::to_string(config.year_lo + y) + ".tsr";
    write_tsr(config.out_dir / name, ref, h);
    track(name);
  }

  // --- Quality band ----------------------------------------------------
  {
    RngStream rng = RngStream::derive(seed, 300);
    RasterGrid quality(fine);
    for (size_t i = 0; i < quality.size(); ++i)
      quality.set_flat(i, 0.5 + 0.5 * rng.next_double());
    write_tsr(config.out_dir / "quality_fine.tsr", quality, make_header("quality"));
    track("quality_fine.tsr");
  }

  // --- Imagery stacks ---------------------------------------------------
  RasterGrid texture(fine);
  {
    RngStream rng = RngStream::derive(seed, 400);
    texture = smooth_noise(fine, 9, rng);
    for (size_t i = 0; i < texture.size(); ++i) texture.set_flat(i, 0.015 * texture[i]);
  }

  const fs::path fine_stack = config.out_dir / "stack_fine";
  const fs::path coarse_stack = config.out_dir / "stack_coarse";
  fs::create_directories(fine_stack);
  fs::create_directories(coarse_stack);
  const int ratio = config.coarse_ratio;

  for (size_t b = 0; b < kBands.size(); ++b) {
    for (int year = config.year_lo; year <= config.year_hi; ++year) {
      for (int month = 1; month <= 12; ++month) {
        RngStream rng = RngStream::derive(
            seed, 1000 + b * 1000 + static_cast<uint64_t>(year) * 12 + month);
        RasterGrid scene(fine), qa(fine);
        const double noise_scale = (b == 6 ? 40.0 : 1.0) * config.reflectance_noise;
        for (int r = 0; r < fine.height; ++r) {
          for (int c = 0; c < fine.width; ++c) {
            const size_t i = scene.index(r, c);
            const int pft_idx = static_cast<int>(std::lround(truth[i])) - 1;
            double v = band_value(pft_idx, static_cast<int>(b), month, texture[i]);
            if (b == 6) v += 10.0 * (fine.center_y(r) - lat_min) / lat_span;
            v += noise_scale * rng.next_normal();
            scene.set_flat(i, b == 6 ? v : std::max(0.001, v));
            qa.set_flat(i, rng.next_double() < config.qa_invalid_fraction ? 0.0 : 1.0);
          }
        }
        char date[16];
        std::snprintf(date, sizeof(date), "%04d-%02d-15", year, month);
        const std::string stem = std::string(kBands[b]) + "_" + date;
        write_tsr(fine_stack / (stem + ".tsr"), scene,
                  make_header(std::string(kBands[b]), date));
        write_tsr(fine_stack / (stem + "_qa.tsr"), qa,
                  make_header(std::string(kBands[b]) + "_qa", date));

        // Coarse scene: footprint mean of the fine scene (linear mixing)
        // plus its own QA dropouts.
        RasterGrid cscene(coarse), cqa(coarse);
        for (int cr = 0; cr < coarse.height; ++cr) {
          for (int cc = 0; cc < coarse.width; ++cc) {
            double acc = 0.0;
            for (int fr = cr * ratio; fr < (cr + 1) * ratio; ++fr)
              for (int fc = cc * ratio; fc < (cc + 1) * ratio; ++fc)
                acc += scene.at(fr, fc);
            cscene.set(cr, cc, acc / (ratio * ratio));
            cqa.set(cr, cc, rng.next_double() < config.qa_invalid_fraction ? 0.0 : 1.0);
          }
        }
        write_tsr(coarse_stack / (stem + ".tsr"), cscene,
                  make_header(std::string(kBands[b]), date));
        write_tsr(coarse_stack / (stem + "_qa.tsr"), cqa,
                  make_header(std::string(kBands[b]) + "_qa", date));
      }
    }
  }

  // --- Elevation --------------------------------------------------------
  {
    RasterGrid elev_fine(fine), elev_coarse(coarse);
    for (int r = 0; r < fine.height; ++r)
      for (int c = 0; c < fine.width; ++c)
        elev_fine.set(r, c, elevation_value(fine.center_y(r), fine.center_x(c)));
    for (int r = 0; r < coarse.height; ++r)
      for (int c = 0; c < coarse.width; ++c)
        elev_coarse.set(r, c, elevation_value(coarse.center_y(r), coarse.center_x(c)));
    write_tsr(config.out_dir / "elevation_fine.tsr", elev_fine, make_header("Elevation"));
    write_tsr(config.out_dir / "elevation_coarse.tsr", elev_coarse, make_header("Elevation"));
    track("elevation_fine.tsr");
    track("elevation_coarse.tsr");
  }

  // --- Climate source rasters (coarser grid, bilinear target) -----------
  {
    RasterGeometry src = coarse;
    src.pixel_size = coarse.pixel_size * 2.0;
    src.width = coarse.width / 2 + 2;
    src.height = coarse.height / 2 + 2;
    src.origin_x = coarse.origin_x - src.pixel_size;
    src.origin_y = coarse.origin_y + src.pixel_size;
    const fs::path climate_dir = config.out_dir / "climate_src";
    fs::create_directories(climate_dir);
    for (int k = 0; k < kNumBioclim; ++k) {
      RasterGrid grid(src);
      for (int r = 0; r < src.height; ++r)
        for (int c = 0; c < src.width; ++c)
          grid.set(r, c, bio_value(k, src.center_y(r), src.center_x(c), lat_min, lat_span,
                                   lon_min, lon_span));
      const std::string name = "bio" + std::to_string(k + 1);
      write_tsr(climate_dir / (name + ".tsr"), grid, make_header(name));
    }
  }

  // --- Trait records -----------------------------------------------------
  {
    RngStream rng = RngStream::derive(seed, 500);

    // Species pools with standardized two-factor latent effects.
    struct Species {
      std::string name, genus, family;
      std::array<double, 2> latent;
    };
    std::array<std::vector<Species>, kNumVegetatedPft> pools;
    for (int p = 0; p < kNumVegetatedPft; ++p) {
      std::array<double, 2> mean{0, 0};
      for (int s = 0; s < config.species_per_pft; ++s) {
        Species sp;
        const std::string tag(pft_name(static_cast<PftClass>(p + 1)));
        sp.name = "sp_" + tag + "_" + std::to_string(s);
        sp.genus = "gen_" + tag + "_" + std::to_string(s / 2);
        sp.family = "fam_" + tag + "_" + std::to_string(s / 4);
        sp.latent = {rng.next_normal(), rng.next_normal()};
        mean[0] += sp.latent[0];
        mean[1] += sp.latent[1];
        pools[p].push_back(std::move(sp));
      }
      // standardize the pool so per-PFT means stay on target
      for (int f = 0; f < 2; ++f) {
        mean[f] /= config.species_per_pft;
        double var = 0.0;
        for (auto& sp : pools[p]) {
          sp.latent[f] -= mean[f];
          var += sp.latent[f] * sp.latent[f];
        }
        var = std::max(var / config.species_per_pft, 1e-12);
        for (auto& sp : pools[p]) sp.latent[f] /= std::sqrt(var);
      }
    }

    // Trait loadings on the two species factors (unit rows); signs give
    // the familiar SLA/LDMC opposition and N-P kinship.
    constexpr std::array<std::array<double, 2>, kNumTraits> kLoadings = {{
        {1.0, 0.0},       // SLA
        {-0.85, 0.527},   // LDMC
        {0.30, 0.954},    // LNC
        {0.20, 0.980},    // LPC
        {0.10, 0.995},    // LNPR
    }};
    constexpr std::array<double, kNumTraits> kClimateSign = {1.0, -1.0, 1.0, 1.0, -1.0};
    const double s_species = std::sqrt(config.species_var_frac);
    const double s_climate = std::sqrt(config.climate_var_frac);
    const double s_noise =
        std::sqrt(std::max(0.0, 1.0 - config.species_var_frac - config.climate_var_frac));

    std::vector<TraitRecord> records;
    records.reserve(static_cast<size_t>(config.n_records));
    int next_id = 0;
    while (static_cast<int>(records.size()) < config.n_records) {
      const double lat = lat_min + rng.next_double() * lat_span;
      const double lon = lon_min + rng.next_double() * lon_span;
      const int col = std::min(fine.width - 1,
                               static_cast<int>((lon - fine.origin_x) / fine.pixel_size));
      const int row = std::min(fine.height - 1,
                               static_cast<int>((fine.origin_y - lat) / fine.pixel_size));
      const int pft_idx = static_cast<int>(std::lround(truth.at(row, col))) - 1;
      if (pft_idx >= kNumVegetatedPft) continue;  // records cover vegetation only

      const auto& pool = pools[pft_idx];
      const Species& sp = pool[rng.next_below(pool.size())];

      TraitRecord rec;
      rec.record_id = "rec" + std::to_string(next_id++);
      rec.species = sp.name;
      rec.genus = sp.genus;
      rec.family = sp.family;
      const PftClass pft = static_cast<PftClass>(pft_idx + 1);
      switch (pft) {
        case PftClass::ENF:
          rec.growth_form = GrowthForm::Tree;
          rec.leaf_type = LeafType::Needleleaf;
          rec.phenology = LeafPhenology::Evergreen;
          break;
        case PftClass::EBF:
          rec.growth_form = GrowthForm::Tree;
          rec.leaf_type = LeafType::Broadleaf;
          rec.phenology = LeafPhenology::Evergreen;
          break;
        case PftClass::DNF:
          rec.growth_form = GrowthForm::Tree;
          rec.leaf_type = LeafType::Needleleaf;
          rec.phenology = LeafPhenology::Deciduous;
          break;
        case PftClass::DBF:
          rec.growth_form = GrowthForm::Tree;
          rec.leaf_type = LeafType::Broadleaf;
          rec.phenology = LeafPhenology::Deciduous;
          break;
        case PftClass::SHL:
          rec.growth_form = GrowthForm::Shrub;
          rec.leaf_type = LeafType::Broadleaf;
          rec.phenology = LeafPhenology::Deciduous;
          break;
        default:
          rec.growth_form = GrowthForm::Grass;
          rec.leaf_type = LeafType::Unknown;
          rec.phenology = LeafPhenology::Unknown;
          break;
      }
      if (rng.next_double() < config.georef_fraction) {
        rec.latitude = lat;
        rec.longitude = lon;
      }
      for (int k = 0; k < kNumBioclim; ++k)
        rec.climate[k] = bio_value(k, lat, lon, lat_min, lat_span, lon_min, lon_span) +
                         0.01 * rng.next_normal();

      // climate driver standardized over the uniform latitude range
      const double zhat = (2.0 * (lat - lat_min) / lat_span - 1.0) * std::sqrt(3.0);
      for (int t = 0; t < kNumTraits; ++t) {
        const double mean = kPftTraitMean[pft_idx][t];
        const double sd = kPftTraitStd[pft_idx][t];
        const double latent =
            kLoadings[t][0] * sp.latent[0] + kLoadings[t][1] * sp.latent[1];
        double v = mean + sd * (s_species * latent + s_climate * kClimateSign[t] * zhat +
                                s_noise * rng.next_normal());
        if (t == static_cast<int>(Trait::LDMC))
          v = std::clamp(v, 0.01, 0.95);
        else
          v = std::max(v, 0.02 * mean);
        rec.traits[t] = v;
      }
      for (int t = 0; t < kNumTraits; ++t)
        if (rng.next_double() < config.missing_fraction[t]) rec.traits[t] = kMissingValue;
      records.push_back(std::move(rec));
    }
    save_trait_table(TraitTable(std::move(records)), config.out_dir / "records.csv");
    world.n_records_written = static_cast<size_t>(config.n_records);
    track("records.csv");
  }

  // --- World manifest -----------------------------------------------------
  {
    nlohmann::json j;
    j["seed"] = seed;
    j["fine"] = {{"width", fine.width},
                 {"height", fine.height},
                 {"pixel_size", fine.pixel_size},
                 {"origin_lat", fine.origin_y},
                 {"origin_lon", fine.origin_x}};
    j["coarse_ratio"] = config.coarse_ratio;
    j["n_records"] = config.n_records;
    j["year_lo"] = config.year_lo;
    j["year_hi"] = config.year_hi;
    j["reference_years"] = config.reference_years;
    std::ofstream out(config.out_dir / "world.json");
    out << j.dump(2) << "\n";
    track("world.json");
  }
  return world;
}

}  // namespace traitscale
