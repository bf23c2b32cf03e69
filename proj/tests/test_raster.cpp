#include <doctest.h>

#include <filesystem>

#include "traitscale/raster.hpp"
#include "traitscale/rng.hpp"

using namespace traitscale;
namespace fs = std::filesystem;

namespace {

RasterGeometry small_geom() {
  RasterGeometry g;
  g.width = 5;
  g.height = 4;
  g.origin_x = 8.0;
  g.origin_y = 46.0;
  g.pixel_size = 0.01;
  return g;
}

}  // namespace

TEST_CASE("pixel centers follow the north-up convention") {
  RasterGrid grid(small_geom());
  CHECK(grid.geometry().center_x(0) == doctest::Approx(8.005));
  CHECK(grid.geometry().center_y(0) == doctest::Approx(45.995));
  CHECK(grid.geometry().center_y(3) == doctest::Approx(45.965));
}

TEST_CASE("TSR round trip is float32 bit-exact") {
  RasterGrid grid(small_geom());
  RngStream rng(3);
  for (size_t i = 0; i < grid.size(); ++i)
    grid.set_flat(i, static_cast<double>(static_cast<float>(rng.next_normal() * 12.3)));
  grid.set_flat(7, grid.nodata());

  const fs::path path = fs::temp_directory_path() / "roundtrip.tsr";
  TsrHeader header = make_header("B4", "2003-06-15");
  write_tsr(path, grid, header);
  const TsrFile loaded = read_tsr(path);
  CHECK(loaded.header.band_id == "B4");
  CHECK(loaded.header.timestamp == "2003-06-15");
  CHECK(loaded.planes.size() == 1);
  const RasterGrid& back = loaded.single();
  CHECK(back.geometry().same_grid(grid.geometry()));
  for (size_t i = 0; i < grid.size(); ++i) CHECK(back[i] == grid[i]);
  CHECK(back.is_nodata(back[7]));
}

TEST_CASE("multi-plane TSR carries all planes in order") {
  std::vector<RasterGrid> planes;
  for (int k = 0; k < 3; ++k) {
    RasterGrid g(small_geom());
    g.fill(static_cast<double>(k));
    planes.push_back(std::move(g));
  }
  const fs::path path = fs::temp_directory_path() / "planes.tsr";
  write_tsr_planes(path, planes, make_header("abundance"));
  const TsrFile loaded = read_tsr(path);
  REQUIRE(loaded.planes.size() == 3);
  CHECK(loaded.planes[0][0] == 0.0);
  CHECK(loaded.planes[2][0] == 2.0);
  CHECK_THROWS_AS(loaded.single(), Error);
}

TEST_CASE("class_codes survive the header round trip") {
  RasterGrid grid(small_geom());
  grid.fill(1.0);
  TsrHeader h = make_header("pft_class");
  h.class_codes = {{"ENF", 1}, {"BARREN", 7}};
  const fs::path path = fs::temp_directory_path() / "classes_hdr.tsr";
  write_tsr(path, grid, h);
  const TsrFile loaded = read_tsr(path);
  CHECK(loaded.header.class_codes.at("ENF") == 1);
  CHECK(loaded.header.class_codes.at("BARREN") == 7);
}

TEST_CASE("truncated payload is rejected") {
  RasterGrid grid(small_geom());
  const fs::path path = fs::temp_directory_path() / "trunc.tsr";
  write_tsr(path, grid);
  fs::resize_file(path, 10);
  CHECK_THROWS_AS(read_tsr(path), Error);
}

TEST_CASE("missing header sidecar is an error") {
  RasterGrid grid(small_geom());
  const fs::path path = fs::temp_directory_path() / "nohdr.tsr";
  write_tsr(path, grid);
  fs::remove(path.string() + ".json");
  CHECK_THROWS_AS(read_tsr(path), Error);
}
