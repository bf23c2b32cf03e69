#include "traitscale/raster_features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "traitscale/parallel.hpp"

namespace traitscale {

using nlohmann::json;

void TimeStack::add(Scene scene) {
  if (!scenes.empty() && !scene.values.geometry().same_grid(scenes.front().values.geometry()))
    throw Error("TimeStack: scene geometry mismatch for band " + scene.band_id);
  if (!scene.qa.geometry().same_grid(scene.values.geometry()))
    throw Error("TimeStack: QA mask geometry mismatch for band " + scene.band_id);
  scenes.push_back(std::move(scene));
}

const RasterGeometry& TimeStack::geometry() const {
  if (scenes.empty()) throw Error("TimeStack: empty stack");
  return scenes.front().values.geometry();
}

TimeStack load_time_stack(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw Error("time-stack directory not found: " + dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".tsr") continue;
    if (name.size() > 7 && name.rfind("_qa.tsr") == name.size() - 7) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  TimeStack stack;
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const size_t sep = stem.rfind('_');
    if (sep == std::string::npos || stem.size() - sep != 11) continue;  // _YYYY-MM-DD
    Scene scene;
    scene.band_id = stem.substr(0, sep);
    const std::string date = stem.substr(sep + 1);
    scene.year = std::stoi(date.substr(0, 4));
    scene.month = std::stoi(date.substr(5, 2));
    scene.day = std::stoi(date.substr(8, 2));

    scene.values = read_tsr(file).single();
    const std::filesystem::path qa_path = file.parent_path() / (stem + "_qa.tsr");
    if (!std::filesystem::exists(qa_path))
      throw Error("missing QA mask for scene " + file.string());
    scene.qa = read_tsr(qa_path).single();
    stack.add(std::move(scene));
  }
  return stack;
}

namespace {

double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<RasterGrid> monthly_median_composite(const TimeStack& stack,
                                                 const std::string& band_id, int year_lo,
                                                 int year_hi) {
  std::vector<const Scene*> selected;
  for (const auto& s : stack.scenes)
    if (s.band_id == band_id && s.year >= year_lo && s.year <= year_hi)
      selected.push_back(&s);
  if (selected.empty()) throw Error("no scenes for band " + band_id);

  const RasterGeometry& geom = selected.front()->values.geometry();
  std::vector<RasterGrid> monthlies;
  monthlies.reserve(12);
  for (int m = 0; m < 12; ++m) monthlies.emplace_back(geom);

  const size_t px = geom.pixel_count();
  parallel_for(static_cast<size_t>(geom.height), 0, [&](size_t row) {
    std::vector<double> values;
    for (int col = 0; col < geom.width; ++col) {
      const size_t i = row * geom.width + col;
      for (int m = 1; m <= 12; ++m) {
        values.clear();
        for (const Scene* s : selected) {
          if (s->month != m) continue;
          if (s->qa[i] != 1.0) continue;
          if (s->values.is_nodata(s->values[i])) continue;
          values.push_back(s->values[i]);
        }
        if (!values.empty()) monthlies[m - 1].set_flat(i, median_of(values));
      }
    }
  });
  (void)px;
  return monthlies;
}

std::string_view veg_index_name(VegIndex v) {
  switch (v) {
    case VegIndex::NDVI: return "NDVI";
    case VegIndex::EVI: return "EVI";
    case VegIndex::NDWI: return "NDWI";
  }
  return "?";
}

RasterGrid vegetation_index(const RasterGrid& red, const RasterGrid& nir,
                            const RasterGrid* blue, const RasterGrid* swir, VegIndex which) {
  if (!red.geometry().same_grid(nir.geometry()))
    throw Error("vegetation_index: red/nir geometry mismatch");
  if (which == VegIndex::EVI && blue == nullptr)
    throw Error("vegetation_index: EVI requires a blue band");
  if (which == VegIndex::NDWI && swir == nullptr)
    throw Error("vegetation_index: NDWI requires a swir band");
  if (blue && !blue->geometry().same_grid(red.geometry()))
    throw Error("vegetation_index: blue geometry mismatch");
  if (swir && !swir->geometry().same_grid(red.geometry()))
    throw Error("vegetation_index: swir geometry mismatch");

  constexpr double kDenEps = 1e-6;
  RasterGrid out(red.geometry());
  for (size_t i = 0; i < out.size(); ++i) {
    const double r = red[i], n = nir[i];
    if (red.is_nodata(r) || nir.is_nodata(n)) continue;
    double value = out.nodata();
    switch (which) {
      case VegIndex::NDVI: {
        const double den = n + r;
        if (std::abs(den) >= kDenEps) value = (n - r) / den;
        break;
      }
      case VegIndex::EVI: {
        const double b = (*blue)[i];
        if (blue->is_nodata(b)) break;
        const double den = n + 6.0 * r - 7.5 * b + 1.0;
        if (std::abs(den) >= kDenEps) value = 2.5 * (n - r) / den;
        break;
      }
      case VegIndex::NDWI: {
        const double s = (*swir)[i];
        if (swir->is_nodata(s)) break;
        const double den = n + s;
        if (std::abs(den) >= kDenEps) value = (n - s) / den;
        break;
      }
    }
    out.set_flat(i, value);
  }
  return out;
}

AnnualSummary annual_summary(const std::vector<RasterGrid>& monthlies) {
  if (monthlies.size() != 12) throw Error("annual_summary: expected 12 monthly grids");
  const RasterGeometry& geom = monthlies.front().geometry();
  for (const auto& g : monthlies)
    if (!g.geometry().same_grid(geom)) throw Error("annual_summary: geometry mismatch");

  AnnualSummary s{RasterGrid(geom), RasterGrid(geom), RasterGrid(geom), RasterGrid(geom)};
  for (size_t i = 0; i < geom.pixel_count(); ++i) {
    double mn = 0, mx = 0, sum = 0, sum2 = 0;
    int n = 0;
    for (const auto& g : monthlies) {
      const double v = g[i];
      if (g.is_nodata(v)) continue;
      if (n == 0) {
        mn = mx = v;
      } else {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      sum += v;
      sum2 += v * v;
      ++n;
    }
    if (n == 0) continue;
    s.max.set_flat(i, mx);
    s.min.set_flat(i, mn);
    s.sum.set_flat(i, sum);
    if (n >= 2) {
      const double mean = sum / n;
      const double var = std::max(0.0, sum2 / n - mean * mean);
      s.std.set_flat(i, std::sqrt(var));
    }
  }
  return s;
}

RasterGrid mode_composite(const std::vector<RasterGrid>& yearly_classes) {
  if (yearly_classes.empty()) throw Error("mode_composite: no input grids");
  const RasterGeometry& geom = yearly_classes.front().geometry();
  for (const auto& g : yearly_classes)
    if (!g.geometry().same_grid(geom)) throw Error("mode_composite: geometry mismatch");

  RasterGrid out(geom);
  for (size_t i = 0; i < geom.pixel_count(); ++i) {
    std::map<int, int> counts;
    for (const auto& g : yearly_classes) {
      const double v = g[i];
      if (g.is_nodata(v)) continue;
      ++counts[static_cast<int>(std::lround(v))];
    }
    if (counts.empty()) continue;
    int best_code = 0, best_count = -1;
    for (const auto& [code, count] : counts) {
      if (count > best_count) {  // map order = ascending code, so ties keep the lowest
        best_code = code;
        best_count = count;
      }
    }
    out.set_flat(i, static_cast<double>(best_code));
  }
  return out;
}

RasterGrid bilinear_resample(const RasterGrid& src, const RasterGeometry& target) {
  const RasterGeometry& sg = src.geometry();
  const double src_min_x = sg.origin_x, src_max_x = sg.origin_x + sg.width * sg.pixel_size;
  const double src_min_y = sg.origin_y - sg.height * sg.pixel_size, src_max_y = sg.origin_y;
  const double tgt_min_x = target.origin_x,
               tgt_max_x = target.origin_x + target.width * target.pixel_size;
  const double tgt_min_y = target.origin_y - target.height * target.pixel_size,
               tgt_max_y = target.origin_y;
  if (tgt_min_x >= src_max_x || tgt_max_x <= src_min_x || tgt_min_y >= src_max_y ||
      tgt_max_y <= src_min_y)
    throw Error("bilinear_resample: source and target extents do not overlap");

  RasterGrid out(target);
  for (int row = 0; row < target.height; ++row) {
    const double y = target.center_y(row);
    // fractional source pixel coordinates of the target center
    const double fy = (sg.origin_y - y) / sg.pixel_size - 0.5;
    for (int col = 0; col < target.width; ++col) {
      const double x = target.center_x(col);
      const double fx = (x - sg.origin_x) / sg.pixel_size - 0.5;
      const int c0 = static_cast<int>(std::floor(fx));
      const int r0 = static_cast<int>(std::floor(fy));
      if (c0 < 0 || r0 < 0 || c0 + 1 >= sg.width || r0 + 1 >= sg.height) continue;
      const double v00 = src.at(r0, c0), v01 = src.at(r0, c0 + 1);
      const double v10 = src.at(r0 + 1, c0), v11 = src.at(r0 + 1, c0 + 1);
      if (src.is_nodata(v00) || src.is_nodata(v01) || src.is_nodata(v10) || src.is_nodata(v11))
        continue;
      const double wx = fx - c0, wy = fy - r0;
      const double top = v00 * (1.0 - wx) + v01 * wx;
      const double bot = v10 * (1.0 - wx) + v11 * wx;
      out.set(row, col, top * (1.0 - wy) + bot * wy);
    }
  }
  return out;
}

FeatureStats standardize_features(Eigen::MatrixXd& X, const std::optional<FeatureStats>& stats) {
  const Eigen::Index n = X.rows(), f = X.cols();
  FeatureStats out;
  if (stats.has_value()) {
    out = *stats;
    if (out.mean.size() != f) throw Error("standardize_features: stats width mismatch");
  } else {
    if (n == 0) throw Error("standardize_features: empty matrix");
    out.mean = X.colwise().mean();
    out.std.resize(f);
    out.zero_variance.assign(static_cast<size_t>(f), 0);
    for (Eigen::Index j = 0; j < f; ++j) {
      const double var = (X.col(j).array() - out.mean[j]).square().sum() / static_cast<double>(n);
      out.std[j] = std::sqrt(var);
      if (out.std[j] == 0.0) out.zero_variance[static_cast<size_t>(j)] = 1;
    }
  }
  for (Eigen::Index j = 0; j < f; ++j) {
    if (out.zero_variance[static_cast<size_t>(j)])
      X.col(j).setZero();
    else
      X.col(j) = (X.col(j).array() - out.mean[j]) / out.std[j];
  }
  return out;
}

const RasterGrid& FeatureSet::band(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return bands[i];
  throw Error("FeatureSet: missing band " + name);
}

bool FeatureSet::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

void FeatureSet::add(std::string name, RasterGrid grid) {
  if (!bands.empty() && !grid.geometry().same_grid(bands.front().geometry()))
    throw Error("FeatureSet: geometry mismatch for band " + name);
  if (has(name)) throw Error("FeatureSet: duplicate band " + name);
  names.push_back(std::move(name));
  bands.push_back(std::move(grid));
}

const RasterGeometry& FeatureSet::geometry() const {
  if (bands.empty()) throw Error("FeatureSet: empty");
  return bands.front().geometry();
}

std::vector<double> FeatureSet::pixel_row(size_t flat_index) const {
  std::vector<double> row(bands.size());
  for (size_t b = 0; b < bands.size(); ++b) {
    const double v = bands[b][flat_index];
    row[b] = bands[b].is_nodata(v) ? kMissingValue : v;
  }
  return row;
}

FeatureConfig load_feature_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open feature config: " + path.string());
  json j = json::parse(in);

  static const std::set<std::string> known = {
      "stack_dir", "reflectance_bands", "red_band",  "nir_band",      "blue_band",
      "swir_band", "lst_band",          "elevation", "extra_rasters", "year_lo",
      "year_hi",   "out_dir"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw Error("feature config: unknown key '" + key + "'");

  FeatureConfig cfg;
  cfg.stack_dir = j.at("stack_dir").get<std::string>();
  cfg.reflectance_bands = j.at("reflectance_bands").get<std::vector<std::string>>();
  cfg.red_band = j.at("red_band").get<std::string>();
  cfg.nir_band = j.at("nir_band").get<std::string>();
  cfg.blue_band = j.at("blue_band").get<std::string>();
  cfg.swir_band = j.at("swir_band").get<std::string>();
  cfg.lst_band = j.value("lst_band", "");
  if (j.contains("elevation")) cfg.elevation_path = j.at("elevation").get<std::string>();
  if (j.contains("extra_rasters"))
    for (const auto& p : j.at("extra_rasters")) cfg.extra_rasters.emplace_back(p.get<std::string>());
  cfg.year_lo = j.value("year_lo", 0);
  cfg.year_hi = j.value("year_hi", 9999);
  cfg.out_dir = j.value("out_dir", "features");
  return cfg;
}

void save_feature_config(const FeatureConfig& cfg, const std::filesystem::path& path) {
  json j;
  j["stack_dir"] = cfg.stack_dir.string();
  j["reflectance_bands"] = cfg.reflectance_bands;
  j["red_band"] = cfg.red_band;
  j["nir_band"] = cfg.nir_band;
  j["blue_band"] = cfg.blue_band;
  j["swir_band"] = cfg.swir_band;
  if (!cfg.lst_band.empty()) j["lst_band"] = cfg.lst_band;
  if (!cfg.elevation_path.empty()) j["elevation"] = cfg.elevation_path.string();
  if (!cfg.extra_rasters.empty()) {
    std::vector<std::string> extras;
    for (const auto& p : cfg.extra_rasters) extras.push_back(p.string());
    j["extra_rasters"] = extras;
  }
  j["year_lo"] = cfg.year_lo;
  j["year_hi"] = cfg.year_hi;
  j["out_dir"] = cfg.out_dir.string();
  std::ofstream out(path);
  if (!out) throw Error("cannot write feature config: " + path.string());
  out << j.dump(2) << "\n";
}

namespace {

RasterGrid median_of_monthlies(const std::vector<RasterGrid>& monthlies) {
  RasterGrid out(monthlies.front().geometry());
  std::vector<double> values;
  for (size_t i = 0; i < out.size(); ++i) {
    values.clear();
    for (const auto& g : monthlies) {
      if (!g.is_nodata(g[i])) values.push_back(g[i]);
    }
    if (!values.empty()) out.set_flat(i, median_of(values));
  }
  return out;
}

void add_summaries(FeatureSet& fs, const std::string& prefix,
                   const std::vector<RasterGrid>& monthlies) {
  AnnualSummary s = annual_summary(monthlies);
  fs.add(prefix + "max", std::move(s.max));
  fs.add(prefix + "min", std::move(s.min));
  fs.add(prefix + "std", std::move(s.std));
  fs.add(prefix + "sum", std::move(s.sum));
}

}  // namespace

FeatureSet build_features(const TimeStack& stack, const FeatureConfig& cfg) {
  FeatureSet fs;
  std::map<std::string, std::vector<RasterGrid>> monthly;
  for (const auto& band : cfg.reflectance_bands)
    monthly[band] = monthly_median_composite(stack, band, cfg.year_lo, cfg.year_hi);

  for (const auto& band : cfg.reflectance_bands)
    fs.add(band + "med", median_of_monthlies(monthly.at(band)));

  const auto& red = monthly.at(cfg.red_band);
  const auto& nir = monthly.at(cfg.nir_band);
  const auto& blue = monthly.at(cfg.blue_band);
  const auto& swir = monthly.at(cfg.swir_band);
  for (VegIndex which : {VegIndex::NDVI, VegIndex::EVI, VegIndex::NDWI}) {
    std::vector<RasterGrid> vi_monthlies;
    vi_monthlies.reserve(12);
    for (int m = 0; m < 12; ++m)
      vi_monthlies.push_back(
          vegetation_index(red[m], nir[m], &blue[m], &swir[m], which));
    std::string prefix(veg_index_name(which));
    add_summaries(fs, prefix, vi_monthlies);
  }

  if (!cfg.lst_band.empty()) {
    auto lst = monthly_median_composite(stack, cfg.lst_band, cfg.year_lo, cfg.year_hi);
    fs.add("LSTmed", median_of_monthlies(lst));
    add_summaries(fs, "LST", lst);
  }

  if (!cfg.elevation_path.empty()) fs.add("Elevation", read_tsr(cfg.elevation_path).single());
  for (const auto& extra : cfg.extra_rasters) {
    TsrFile f = read_tsr(extra);
    std::string name = f.header.band_id.empty() ? extra.stem().string() : f.header.band_id;
    fs.add(std::move(name), std::move(f.planes.front()));
  }
  return fs;
}

void write_feature_dir(const FeatureSet& features, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json index;
  index["bands"] = features.names;
  for (size_t i = 0; i < features.names.size(); ++i) {
    TsrHeader h;
    h.band_id = features.names[i];
    write_tsr(dir / (features.names[i] + ".tsr"), features.bands[i], h);
  }
  std::ofstream out(dir / "bands.json");
  if (!out) throw Error("cannot write feature index");
  out << index.dump(2) << "\n";
}

FeatureSet load_feature_dir(const std::filesystem::path& dir) {
  std::ifstream in(dir / "bands.json");
  if (!in) throw Error("missing feature index: " + (dir / "bands.json").string());
  json index = json::parse(in);
  FeatureSet fs;
  for (const auto& name : index.at("bands").get<std::vector<std::string>>())
    fs.add(name, read_tsr(dir / (name + ".tsr")).single());
  return fs;
}

}  // namespace traitscale
