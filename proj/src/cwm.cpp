#include "traitscale/cwm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "traitscale/error.hpp"

namespace traitscale {

namespace {
constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kKmPerDegLat = kEarthRadiusKm * kDegToRad;  // ~111.195
}  // namespace

double haversine_km(double lat_a, double lon_a, double lat_b, double lon_b) {
  const double phi_a = lat_a * kDegToRad;
  const double phi_b = lat_b * kDegToRad;
  const double dphi = (lat_b - lat_a) * kDegToRad;
  const double dlambda = (lon_b - lon_a) * kDegToRad;
  const double s_phi = std::sin(0.5 * dphi);
  const double s_lam = std::sin(0.5 * dlambda);
  const double a = s_phi * s_phi + std::cos(phi_a) * std::cos(phi_b) * s_lam * s_lam;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

RecordIndex::RecordIndex(const TraitTable& table) {
  for (const auto& r : table.records()) {
    if (!r.georeferenced()) continue;
    const auto pft = species_to_pft(r);
    if (!pft || !is_vegetated(*pft)) continue;
    GeoRecord g;
    g.record_id = r.record_id;
    g.lat = *r.latitude;
    g.lon = *r.longitude;
    g.pft = *pft;
    g.traits = r.traits;
    records_.push_back(std::move(g));
  }
  std::sort(records_.begin(), records_.end(), [](const GeoRecord& a, const GeoRecord& b) {
    if (a.lat != b.lat) return a.lat < b.lat;
    return a.record_id < b.record_id;
  });
}

std::vector<size_t> RecordIndex::candidates_within(double lat, double lon,
                                                   double max_km) const {
  const double dlat = max_km / kKmPerDegLat + 1e-9;
  const double lat_lo = lat - dlat, lat_hi = lat + dlat;

  auto lower = std::lower_bound(records_.begin(), records_.end(), lat_lo,
                                [](const GeoRecord& r, double v) { return r.lat < v; });
  auto upper = std::upper_bound(records_.begin(), records_.end(), lat_hi,
                                [](double v, const GeoRecord& r) { return v < r.lat; });

  // Longitude window: haversine gives d >= 2R*asin(cos_min*|sin(dlon/2)|),
  // so any in-range record satisfies |sin(dlon/2)| <= sin(max/2R)/cos_min.
  const double abs_lat_max = std::min(90.0, std::max(std::abs(lat_lo), std::abs(lat_hi)));
  const double cos_min = std::cos(abs_lat_max * kDegToRad);
  double dlon_deg = 360.0;
  if (cos_min > 1e-6) {
    const double s = std::sin(0.5 * max_km / kEarthRadiusKm) / cos_min;
    if (s < 1.0) dlon_deg = 2.0 * std::asin(s) / kDegToRad + 1e-9;
  }

  std::vector<size_t> out;
  for (auto it = lower; it != upper; ++it) {
    double dl = std::abs(it->lon - lon);
    if (dl > 180.0) dl = 360.0 - dl;
    if (dl <= dlon_deg)
      out.push_back(static_cast<size_t>(std::distance(records_.begin(), it)));
  }
  return out;
}

std::vector<Neighbor> neighbor_select(const RecordIndex& index, double lat, double lon,
                                      PftClass pft, double max_km, int k) {
  if (!(max_km > 0.0)) throw Error("neighbor_select: max_km must be positive");
  if (k < 1) throw Error("neighbor_select: k must be >= 1");

  std::vector<Neighbor> hits;
  for (size_t i : index.candidates_within(lat, lon, max_km)) {
    const GeoRecord& r = index.records()[i];
    if (r.pft != pft) continue;
    const double d = haversine_km(lat, lon, r.lat, r.lon);
    if (d <= max_km) hits.push_back({&r, d});
  }
  std::sort(hits.begin(), hits.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance_km != b.distance_km) return a.distance_km < b.distance_km;
    return a.record->record_id < b.record->record_id;
  });
  if (hits.size() > static_cast<size_t>(k)) hits.resize(static_cast<size_t>(k));
  return hits;
}

std::optional<CwmSample> pixel_cwm(size_t pixel_id, double lat, double lon,
                                   const std::array<double, kNumPft>& abundance,
                                   const RecordIndex& records, const CwmConfig& config) {
  double veg_total = 0.0;
  for (int p = 0; p < kNumVegetatedPft; ++p) veg_total += abundance[p];
  if (!(veg_total > 0.0)) return std::nullopt;

  CwmSample sample;
  sample.pixel_id = pixel_id;
  sample.lat = lat;
  sample.lon = lon;
  sample.abundance = abundance;

  std::array<std::array<double, kNumTraits>, kNumVegetatedPft> pft_means{};
  std::array<bool, kNumVegetatedPft> represented{};
  double represented_abundance = 0.0;

  for (int p = 0; p < kNumVegetatedPft; ++p) {
    if (!(abundance[p] > 0.0)) continue;
    const PftClass pft = static_cast<PftClass>(p + 1);
    const auto neighbors = neighbor_select(records, lat, lon, pft, config.max_km, config.k);
    if (neighbors.empty()) continue;
    represented[p] = true;
    represented_abundance += abundance[p];
    for (const auto& n : neighbors) {
      sample.contributions[p].push_back({n.record->record_id, n.distance_km});
      for (int t = 0; t < kNumTraits; ++t) pft_means[p][t] += n.record->traits[t];
    }
    for (int t = 0; t < kNumTraits; ++t)
      pft_means[p][t] /= static_cast<double>(neighbors.size());
  }

  sample.represented_fraction = represented_abundance / veg_total;
  if (!(sample.represented_fraction > config.min_represented)) return std::nullopt;

  // Convex combination over the represented PFTs (renormalized weights).
  for (int t = 0; t < kNumTraits; ++t) {
    double acc = 0.0;
    for (int p = 0; p < kNumVegetatedPft; ++p)
      if (represented[p]) acc += abundance[p] * pft_means[p][t];
    sample.traits[t] = acc / represented_abundance;
  }
  return sample;
}

CwmTrainingSet build_training_set(const AbundanceGrid& abundance, const FeatureSet& features,
                                  const RecordIndex& records, const CwmConfig& config) {
  if (!features.geometry().same_grid(abundance.geometry))
    throw Error("build_training_set: abundance/feature geometry mismatch");

  CwmTrainingSet out;
  out.feature_names = features.names;
  std::vector<std::vector<double>> rows;
  std::vector<std::array<double, kNumTraits>> targets;

  const RasterGeometry& geom = abundance.geometry;
  for (size_t i = 0; i < geom.pixel_count(); ++i) {
    if (!abundance.valid(i)) continue;
    const int row = static_cast<int>(i) / geom.width;
    const int col = static_cast<int>(i) % geom.width;
    const double lat = geom.center_y(row);
    const double lon = geom.center_x(col);
    auto sample = pixel_cwm(i, lat, lon, abundance.fractions[i], records, config);
    if (!sample) continue;

    std::vector<double> feat = features.pixel_row(i);
    if (std::any_of(feat.begin(), feat.end(), [](double v) { return is_missing(v); })) {
      ++out.dropped_nodata;
      continue;
    }
    rows.push_back(std::move(feat));
    targets.push_back(sample->traits);
    out.meta.push_back(std::move(*sample));
  }

  out.X.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(out.feature_names.size()));
  out.Y.resize(static_cast<Eigen::Index>(rows.size()), kNumTraits);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j)
      out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    for (int t = 0; t < kNumTraits; ++t)
      out.Y(static_cast<Eigen::Index>(i), t) = targets[i][t];
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_cwm_csv(const CwmTrainingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write cwm csv: " + path.string());
  out << "pixel_id,lat,lon";
  for (PftClass p : kAllPft) {
    std::string name(pft_name(p));
    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
    out << ",abund_" << name;
  }
  out << ",represented_fraction";
  for (Trait t : kAllTraits) out << ',' << trait_name(t);
  for (const auto& f : set.feature_names) out << ',' << f;
  out << "\n";

  for (size_t i = 0; i < set.meta.size(); ++i) {
    const CwmSample& s = set.meta[i];
    out << s.pixel_id << ',' << fmt(s.lat) << ',' << fmt(s.lon);
    for (int p = 0; p < kNumPft; ++p) out << ',' << fmt(s.abundance[p]);
    out << ',' << fmt(s.represented_fraction);
    for (int t = 0; t < kNumTraits; ++t) out << ',' << fmt(s.traits[t]);
    for (Eigen::Index j = 0; j < set.X.cols(); ++j)
      out << ',' << fmt(set.X(static_cast<Eigen::Index>(i), j));
    out << "\n";
  }
}

CwmTrainingSet load_cwm_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open cwm csv: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error("empty cwm csv: " + path.string());

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const size_t fixed = 3 + kNumPft + 1 + kNumTraits;
  if (header.size() < fixed) throw Error("cwm csv: malformed header");

  CwmTrainingSet set;
  for (size_t i = fixed; i < header.size(); ++i) set.feature_names.push_back(header[i]);

  std::vector<std::vector<double>> rows;
  std::vector<CwmSample> meta;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() != header.size())
      throw Error("cwm csv row " + std::to_string(line_no) + ": wrong field count");

    CwmSample s;
    s.pixel_id = static_cast<size_t>(cells[0]);
    s.lat = cells[1];
    s.lon = cells[2];
    for (int p = 0; p < kNumPft; ++p) s.abundance[p] = cells[3 + p];
    s.represented_fraction = cells[3 + kNumPft];
    for (int t = 0; t < kNumTraits; ++t) s.traits[t] = cells[4 + kNumPft + t];
    meta.push_back(std::move(s));
    rows.emplace_back(cells.begin() + static_cast<long>(fixed), cells.end());
  }

  set.meta = std::move(meta);
  set.X.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(set.feature_names.size()));
  set.Y.resize(static_cast<Eigen::Index>(rows.size()), kNumTraits);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j)
      set.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    for (int t = 0; t < kNumTraits; ++t)
      set.Y(static_cast<Eigen::Index>(i), t) = set.meta[i].traits[t];
  }
  return set;
}

std::vector<PftClass> dominant_pfts(const CwmTrainingSet& set) {
  std::vector<PftClass> out;
  out.reserve(set.meta.size());
  for (const auto& s : set.meta) {
    int best = 0;
    for (int p = 1; p < kNumPft; ++p)
      if (s.abundance[p] > s.abundance[best]) best = p;
    out.push_back(static_cast<PftClass>(best + 1));
  }
  return out;
}

}  // namespace traitscale
