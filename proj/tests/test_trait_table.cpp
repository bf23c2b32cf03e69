#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "traitscale/trait_table.hpp"

using namespace traitscale;
namespace fs = std::filesystem;

namespace {

std::string header_line() {
  std::string h = "record_id,species,genus,family,growth_form,leaf_type,leaf_phenology,lat,lon";
  for (int i = 1; i <= 19; ++i) h += ",bio" + std::to_string(i);
  return h + ",sla,ldmc,lnc,lpc,lnpr";
}

std::string data_row(const std::string& id, const std::string& species,
                     const std::string& growth = "tree", const std::string& leaf = "broadleaf",
                     const std::string& phen = "deciduous", const std::string& lat = "45.0",
                     const std::string& lon = "7.5", const std::string& sla = "15.2") {
  std::string row = id + "," + species + ",gen,fam," + growth + "," + leaf + "," + phen + "," +
                    lat + "," + lon;
  for (int i = 1; i <= 19; ++i) row += "," + std::to_string(i * 1.5);
  row += "," + sla + ",0.3,20,1.2,14";
  return row;
}

fs::path write_csv(const std::vector<std::string>& rows, const std::string& name) {
  const fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << header_line() << "\n";
  for (const auto& r : rows) out << r << "\n";
  return path;
}

}  // namespace

TEST_CASE("load ingests valid rows one-to-one") {
  const auto path = write_csv({data_row("r1", "a"), data_row("r2", "b"), data_row("r3", "c")},
                              "tt_valid.csv");
  const TraitTable table = load_trait_table(path);
  CHECK(table.size() == 3);
  CHECK(table[0].record_id == "r1");
  CHECK(table[2].species == "c");
  CHECK(table[0].trait(Trait::SLA) == doctest::Approx(15.2));
}

TEST_CASE("out-of-range latitude is rejected with the row number") {
  const auto path = write_csv({data_row("r1", "a"), data_row("r2", "b", "tree", "broadleaf",
                                                             "deciduous", "95.0")},
                              "tt_badlat.csv");
  CHECK_THROWS_WITH_AS(load_trait_table(path), doctest::Contains("row 3"), Error);
}

TEST_CASE("empty trait cell becomes a missing value") {
  const auto path =
      write_csv({data_row("r1", "a", "tree", "broadleaf", "deciduous", "45", "7.5", "")},
                "tt_missing.csv");
  const TraitTable table = load_trait_table(path);
  CHECK(is_missing(table[0].trait(Trait::SLA)));
  CHECK(!is_missing(table[0].trait(Trait::LDMC)));
}

TEST_CASE("load validation errors") {
  SUBCASE("duplicate record ids") {
    const auto path = write_csv({data_row("r1", "a"), data_row("r1", "b")}, "tt_dup.csv");
    CHECK_THROWS_AS(load_trait_table(path), Error);
  }
  SUBCASE("header mismatch") {
    const fs::path path = fs::temp_directory_path() / "tt_header.csv";
    std::ofstream(path) << "record_id,species\nr1,a\n";
    CHECK_THROWS_WITH_AS(load_trait_table(path), doctest::Contains("header"), Error);
  }
  SUBCASE("unparsable numeric") {
    const auto path = write_csv(
        {data_row("r1", "a", "tree", "broadleaf", "deciduous", "45", "7.5", "abc")},
        "tt_nan.csv");
    CHECK_THROWS_WITH_AS(load_trait_table(path), doctest::Contains("unparsable"), Error);
  }
  SUBCASE("ldmc outside (0,1)") {
    std::string row = data_row("r1", "a");
    const auto pos = row.rfind(",0.3,");
    row.replace(pos, 5, ",1.5,");
    const auto path = write_csv({row}, "tt_ldmc.csv");
    CHECK_THROWS_AS(load_trait_table(path), Error);
  }
  SUBCASE("latitude without longitude") {
    const auto path = write_csv(
        {data_row("r1", "a", "tree", "broadleaf", "deciduous", "45", "")}, "tt_halfcoord.csv");
    CHECK_THROWS_AS(load_trait_table(path), Error);
  }
}

TEST_CASE("save/load round trip preserves numeric cells bit-exactly") {
  std::vector<TraitRecord> records;
  TraitRecord r;
  r.record_id = "r1";
  r.species = "sp";
  r.growth_form = GrowthForm::Grass;
  r.latitude = 12.3456789012345;
  r.longitude = -7.000000001;
  r.climate[0] = 0.1 + 0.2;  // not exactly representable
  r.traits[0] = 1.0 / 3.0;
  r.traits[1] = 0.2999999999999999;
  records.push_back(r);
  const TraitTable table{records};

  const fs::path path = fs::temp_directory_path() / "tt_roundtrip.csv";
  save_trait_table(table, path);
  const TraitTable loaded = load_trait_table(path);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].climate[0] == r.climate[0]);
  CHECK(loaded[0].traits[0] == r.traits[0]);
  CHECK(loaded[0].traits[1] == r.traits[1]);
  CHECK(*loaded[0].latitude == *r.latitude);
  CHECK(is_missing(loaded[0].traits[2]));

  // second trip is byte-stable
  const fs::path path2 = fs::temp_directory_path() / "tt_roundtrip2.csv";
  save_trait_table(loaded, path2);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

namespace {

TraitTable table_with_sla(const std::string& species, const std::vector<double>& values) {
  std::vector<TraitRecord> records;
  for (size_t i = 0; i < values.size(); ++i) {
    TraitRecord r;
    r.record_id = species + std::to_string(i);
    r.species = species;
    r.traits[0] = values[i];
    records.push_back(r);
  }
  return TraitTable{records};
}

}  // namespace

TEST_CASE("outlier rule removes values beyond k population stds") {
  // mean 17.5, population std 12.9904, threshold 19.4856: only 40 exceeds
  const TraitTable table = table_with_sla("a", {10, 10, 10, 40});
  auto [cleaned, removed] = remove_outliers(table, 1.5);
  REQUIRE(removed.size() == 1);
  CHECK(removed[0].record_id == "a3");
  CHECK(removed[0].trait == Trait::SLA);
  CHECK(is_missing(cleaned[3].trait(Trait::SLA)));
  CHECK(cleaned[0].trait(Trait::SLA) == 10.0);
}

TEST_CASE("outlier rule leaves degenerate groups alone") {
  SUBCASE("single value") {
    auto [cleaned, removed] = remove_outliers(table_with_sla("a", {40}), 1.5);
    CHECK(removed.empty());
    CHECK(cleaned[0].trait(Trait::SLA) == 40.0);
  }
  SUBCASE("all equal") {
    auto [cleaned, removed] = remove_outliers(table_with_sla("a", {5, 5, 5}), 1.5);
    CHECK(removed.empty());
  }
}

TEST_CASE("outlier pass is single-pass against the original statistics") {
  const TraitTable table = table_with_sla("a", {10, 10, 10, 12, 40, 41});
  auto [cleaned, removed] = remove_outliers(table, 1.5);
  // every surviving value satisfies the rule under the ORIGINAL stats
  double mean = 0, n = 0;
  for (const auto& r : table.records()) {
    mean += r.trait(Trait::SLA);
    n += 1;
  }
  mean /= n;
  double ss = 0;
  for (const auto& r : table.records()) {
    const double d = r.trait(Trait::SLA) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / n);
  size_t present = 0;
  for (const auto& r : cleaned.records()) {
    if (is_missing(r.trait(Trait::SLA))) continue;
    ++present;
    CHECK(std::abs(r.trait(Trait::SLA) - mean) <= 1.5 * sd);
  }
  CHECK(present + removed.size() == table.size());
}

TEST_CASE("outlier pass never adds values") {
  const TraitTable table = table_with_sla("a", {1, 2, 3, 4, 100});
  auto [cleaned, removed] = remove_outliers(table, 0.5);
  size_t before = 0, after = 0;
  for (const auto& r : table.records())
    if (!is_missing(r.trait(Trait::SLA))) ++before;
  for (const auto& r : cleaned.records())
    if (!is_missing(r.trait(Trait::SLA))) ++after;
  CHECK(after <= before);
  CHECK(after + removed.size() == before);
}

TEST_CASE("fern/crop exclusion") {
  std::vector<TraitRecord> records;
  for (int i = 0; i < 99; ++i) {
    TraitRecord r;
    r.record_id = "r" + std::to_string(i);
    r.growth_form = GrowthForm::Tree;
    records.push_back(r);
  }
  TraitRecord crop;
  crop.record_id = "crop";
  crop.growth_form = GrowthForm::Crop;
  records.push_back(crop);
  const TraitTable table{records};

  SUBCASE("one crop removed") {
    auto [kept, dropped] = drop_excluded_groups(table, {GrowthForm::Fern, GrowthForm::Crop});
    CHECK(kept.size() == 99);
    CHECK(dropped == 1);
  }
  SUBCASE("empty set is identity") {
    auto [kept, dropped] = drop_excluded_groups(table, {});
    CHECK(kept.size() == 100);
    CHECK(dropped == 0);
  }
  SUBCASE("all rows excluded gives an empty table") {
    auto [kept, dropped] =
        drop_excluded_groups(table, {GrowthForm::Tree, GrowthForm::Crop});
    CHECK(kept.size() == 0);
    CHECK(dropped == 100);
  }
}

TEST_CASE("species to PFT mapping") {
  TraitRecord r;
  r.growth_form = GrowthForm::Tree;
  r.leaf_type = LeafType::Broadleaf;
  r.phenology = LeafPhenology::Deciduous;
  CHECK(species_to_pft(r) == PftClass::DBF);

  r.leaf_type = LeafType::Needleleaf;
  CHECK(species_to_pft(r) == PftClass::DNF);
  r.phenology = LeafPhenology::Evergreen;
  CHECK(species_to_pft(r) == PftClass::ENF);
  r.leaf_type = LeafType::Broadleaf;
  CHECK(species_to_pft(r) == PftClass::EBF);

  r.growth_form = GrowthForm::Grass;
  r.leaf_type = LeafType::Unknown;
  CHECK(species_to_pft(r) == PftClass::GRL);
  r.growth_form = GrowthForm::Shrub;
  CHECK(species_to_pft(r) == PftClass::SHL);

  r.growth_form = GrowthForm::Tree;
  r.leaf_type = LeafType::Unknown;
  r.phenology = LeafPhenology::Deciduous;
  CHECK(!species_to_pft(r).has_value());
  r.growth_form = GrowthForm::Fern;
  CHECK(!species_to_pft(r).has_value());

  // pure function: repeated calls agree
  r.growth_form = GrowthForm::Grass;
  CHECK(species_to_pft(r) == species_to_pft(r));
}
