#include "traitscale/trait_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "traitscale/error.hpp"

namespace traitscale {

std::string_view growth_form_name(GrowthForm g) {
  switch (g) {
    case GrowthForm::Tree: return "tree";
    case GrowthForm::Shrub: return "shrub";
    case GrowthForm::Grass: return "grass";
    case GrowthForm::Fern: return "fern";
    case GrowthForm::Crop: return "crop";
    case GrowthForm::Other: return "other";
  }
  return "?";
}

std::string_view leaf_type_name(LeafType t) {
  switch (t) {
    case LeafType::Needleleaf: return "needleleaf";
    case LeafType::Broadleaf: return "broadleaf";
    case LeafType::Unknown: return "unknown";
  }
  return "?";
}

std::string_view phenology_name(LeafPhenology p) {
  switch (p) {
    case LeafPhenology::Evergreen: return "evergreen";
    case LeafPhenology::Deciduous: return "deciduous";
    case LeafPhenology::Unknown: return "unknown";
  }
  return "?";
}

std::optional<GrowthForm> growth_form_from_name(std::string_view s) {
  for (GrowthForm g : {GrowthForm::Tree, GrowthForm::Shrub, GrowthForm::Grass,
                       GrowthForm::Fern, GrowthForm::Crop, GrowthForm::Other})
    if (growth_form_name(g) == s) return g;
  return std::nullopt;
}

std::optional<LeafType> leaf_type_from_name(std::string_view s) {
  for (LeafType t : {LeafType::Needleleaf, LeafType::Broadleaf, LeafType::Unknown})
    if (leaf_type_name(t) == s) return t;
  return std::nullopt;
}

std::optional<LeafPhenology> phenology_from_name(std::string_view s) {
  for (LeafPhenology p :
       {LeafPhenology::Evergreen, LeafPhenology::Deciduous, LeafPhenology::Unknown})
    if (phenology_name(p) == s) return p;
  return std::nullopt;
}

TraitTable::TraitTable(std::vector<TraitRecord> records) : records_(std::move(records)) {
  std::set<std::string_view> seen;
  for (const auto& r : records_) {
    if (!seen.insert(r.record_id).second)
      throw Error("TraitTable: duplicate record_id '" + r.record_id + "'");
  }
}

namespace {

const char* kHeaderPrefix =
    "record_id,species,genus,family,growth_form,leaf_type,leaf_phenology,lat,lon";

std::string expected_header() {
  std::string h = kHeaderPrefix;
  for (int i = 1; i <= kNumBioclim; ++i) h += ",bio" + std::to_string(i);
  h += ",sla,ldmc,lnc,lpc,lnpr";
  return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_cell(const std::string& cell, size_t row, const std::string& column) {
  if (cell.empty()) return kMissingValue;
  double v = 0.0;
  const auto* begin = cell.data();
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw Error("row " + std::to_string(row) + ": unparsable numeric cell '" + cell +
                "' in column " + column);
  return v;
}

std::string format_value(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

TraitTable load_trait_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trait table: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error("empty trait table file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::string expected = expected_header();
  if (line != expected)
    throw Error("trait table header mismatch; expected '" + expected + "'");

  const size_t n_fields = 9 + kNumBioclim + kNumTraits;
  std::vector<TraitRecord> records;
  size_t row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != n_fields)
      throw Error("row " + std::to_string(row) + ": expected " + std::to_string(n_fields) +
                  " fields, got " + std::to_string(fields.size()));

    TraitRecord r;
    r.record_id = fields[0];
    if (r.record_id.empty()) throw Error("row " + std::to_string(row) + ": empty record_id");
    r.species = fields[1];
    r.genus = fields[2];
    r.family = fields[3];
    if (auto g = growth_form_from_name(fields[4]))
      r.growth_form = *g;
    else
      throw Error("row " + std::to_string(row) + ": unknown growth_form '" + fields[4] + "'");
    if (auto t = leaf_type_from_name(fields[5].empty() ? "unknown" : fields[5]))
      r.leaf_type = *t;
    else
      throw Error("row " + std::to_string(row) + ": unknown leaf_type '" + fields[5] + "'");
    if (auto p = phenology_from_name(fields[6].empty() ? "unknown" : fields[6]))
      r.phenology = *p;
    else
      throw Error("row " + std::to_string(row) + ": unknown leaf_phenology '" + fields[6] + "'");

    const double lat = parse_cell(fields[7], row, "lat");
    const double lon = parse_cell(fields[8], row, "lon");
    if (!is_missing(lat) != !is_missing(lon))
      throw Error("row " + std::to_string(row) + ": latitude and longitude must come together");
    if (!is_missing(lat)) {
      if (lat < -90.0 || lat > 90.0)
        throw Error("row " + std::to_string(row) + ": latitude out of range: " + fields[7]);
      if (lon < -180.0 || lon > 180.0)
        throw Error("row " + std::to_string(row) + ": longitude out of range: " + fields[8]);
      r.latitude = lat;
      r.longitude = lon;
    }

    for (int b = 0; b < kNumBioclim; ++b)
      r.climate[b] = parse_cell(fields[9 + b], row, "bio" + std::to_string(b + 1));

    for (int t = 0; t < kNumTraits; ++t) {
      const std::string col(trait_name(static_cast<Trait>(t)));
      const double v = parse_cell(fields[9 + kNumBioclim + t], row, col);
      if (!is_missing(v)) {
        if (!(v > 0.0) || !std::isfinite(v))
          throw Error("row " + std::to_string(row) + ": " + col +
                      " must be strictly positive and finite");
        if (static_cast<Trait>(t) == Trait::LDMC && v >= 1.0)
          throw Error("row " + std::to_string(row) + ": ldmc must lie in (0, 1)");
      }
      r.traits[t] = v;
    }
    records.push_back(std::move(r));
  }
  return TraitTable(std::move(records));
}

void save_trait_table(const TraitTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trait table: " + path.string());
  out << expected_header() << "\n";
  for (const auto& r : table.records()) {
    out << r.record_id << ',' << r.species << ',' << r.genus << ',' << r.family << ','
        << growth_form_name(r.growth_form) << ',' << leaf_type_name(r.leaf_type) << ','
        << phenology_name(r.phenology) << ',';
    if (r.georeferenced())
      out << format_value(*r.latitude) << ',' << format_value(*r.longitude);
    else
      out << ',';
    for (int b = 0; b < kNumBioclim; ++b) {
      out << ',';
      if (!is_missing(r.climate[b])) out << format_value(r.climate[b]);
    }
    for (int t = 0; t < kNumTraits; ++t) {
      out << ',';
      if (!is_missing(r.traits[t])) out << format_value(r.traits[t]);
    }
    out << "\n";
  }
}

std::pair<TraitTable, std::vector<OutlierRemoval>> remove_outliers(const TraitTable& table,
                                                                   double k) {
  if (!(k > 0.0)) throw Error("remove_outliers: k must be positive");

  // Group statistics are computed once on the input values; the pass is
  // therefore idempotent for a fixed k.
  std::map<std::pair<std::string, int>, std::pair<double, double>> stats;  // mean, std
  {
    std::map<std::pair<std::string, int>, std::vector<double>> groups;
    for (const auto& r : table.records())
      for (int t = 0; t < kNumTraits; ++t)
        if (!is_missing(r.traits[t])) groups[{r.species, t}].push_back(r.traits[t]);
    for (const auto& [key, values] : groups) {
      if (values.size() < 2) continue;
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(values.size()));
      stats[key] = {mean, sd};
    }
  }

  std::vector<TraitRecord> records = table.records();
  std::vector<OutlierRemoval> removed;
  for (auto& r : records) {
    for (int t = 0; t < kNumTraits; ++t) {
      if (is_missing(r.traits[t])) continue;
      const auto it = stats.find({r.species, t});
      if (it == stats.end()) continue;
      const auto [mean, sd] = it->second;
      if (std::abs(r.traits[t] - mean) > k * sd) {
        removed.push_back({r.record_id, static_cast<Trait>(t), r.traits[t]});
        r.traits[t] = kMissingValue;
      }
    }
  }
  return {TraitTable(std::move(records)), std::move(removed)};
}

std::pair<TraitTable, size_t> drop_excluded_groups(const TraitTable& table,
                                                   const std::set<GrowthForm>& excluded) {
  std::vector<TraitRecord> kept;
  kept.reserve(table.size());
  size_t dropped = 0;
  for (const auto& r : table.records()) {
    if (excluded.count(r.growth_form))
      ++dropped;
    else
      kept.push_back(r);
  }
  return {TraitTable(std::move(kept)), dropped};
}

std::optional<PftClass> species_to_pft(const TraitRecord& record) {
  switch (record.growth_form) {
    case GrowthForm::Shrub: return PftClass::SHL;
    case GrowthForm::Grass: return PftClass::GRL;
    case GrowthForm::Tree: break;
    default: return std::nullopt;
  }
  if (record.leaf_type == LeafType::Unknown || record.phenology == LeafPhenology::Unknown)
    return std::nullopt;
  const bool needle = record.leaf_type == LeafType::Needleleaf;
  const bool evergreen = record.phenology == LeafPhenology::Evergreen;
  if (needle) return evergreen ? PftClass::ENF : PftClass::DNF;
  return evergreen ? PftClass::EBF : PftClass::DBF;
}

ColumnSchema gapfill_predictor_schema(const TraitTable& table, Trait target) {
  ColumnSchema schema;
  auto add_categorical = [&](const std::string& name, auto getter) {
    std::set<std::string> levels;
    for (const auto& r : table.records()) {
      std::string v = getter(r);
      if (!v.empty()) levels.insert(std::move(v));
    }
    ColumnSpec spec;
    spec.name = name;
    spec.kind = ColumnKind::Categorical;
    spec.categories.assign(levels.begin(), levels.end());
    schema.columns.push_back(std::move(spec));
  };

  add_categorical("species", [](const TraitRecord& r) { return r.species; });
  add_categorical("genus", [](const TraitRecord& r) { return r.genus; });
  add_categorical("family", [](const TraitRecord& r) { return r.family; });
  add_categorical("growth_form",
                  [](const TraitRecord& r) { return std::string(growth_form_name(r.growth_form)); });
  add_categorical("leaf_type",
                  [](const TraitRecord& r) { return std::string(leaf_type_name(r.leaf_type)); });
  add_categorical("leaf_phenology",
                  [](const TraitRecord& r) { return std::string(phenology_name(r.phenology)); });

  for (int b = 1; b <= kNumBioclim; ++b)
    schema.columns.push_back({"bio" + std::to_string(b), ColumnKind::Numeric, {}});
  for (Trait t : kAllTraits)
    if (t != target)
      schema.columns.push_back({std::string(trait_name(t)), ColumnKind::Numeric, {}});
  return schema;
}

DataTable gapfill_predictor_matrix(const TraitTable& table, Trait target,
                                   const ColumnSchema& schema) {
  DataTable data(schema);
  data.resize_rows(table.size());

  auto code_of = [](const ColumnSpec& spec, const std::string& label) -> double {
    if (label.empty()) return kMissingValue;
    const int code = spec.category_code(label);
    return code < 0 ? kMissingValue : static_cast<double>(code);
  };

  for (size_t i = 0; i < table.size(); ++i) {
    const TraitRecord& r = table[i];
    size_t c = 0;
    data.set(i, c, code_of(schema.at(c), r.species));
    ++c;
    data.set(i, c, code_of(schema.at(c), r.genus));
    ++c;
    data.set(i, c, code_of(schema.at(c), r.family));
    ++c;
    data.set(i, c, code_of(schema.at(c), std::string(growth_form_name(r.growth_form))));
    ++c;
    data.set(i, c, code_of(schema.at(c), std::string(leaf_type_name(r.leaf_type))));
    ++c;
    data.set(i, c, code_of(schema.at(c), std::string(phenology_name(r.phenology))));
    ++c;
    for (int b = 0; b < kNumBioclim; ++b, ++c) data.set(i, c, r.climate[b]);
    for (Trait t : kAllTraits)
      if (t != target) data.set(i, c++, r.trait(t));
  }
  return data;
}

}  // namespace traitscale
