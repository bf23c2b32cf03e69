#include <doctest.h>

#include <algorithm>

#include "traitscale/raster_features.hpp"
#include "traitscale/rng.hpp"

using namespace traitscale;

namespace {

RasterGeometry geom(int w = 3, int h = 3, double px = 0.01) {
  RasterGeometry g;
  g.width = w;
  g.height = h;
  g.origin_x = 8.0;
  g.origin_y = 46.0;
  g.pixel_size = px;
  return g;
}

Scene scene(const std::string& band, int year, int month, double value, double qa = 1.0) {
  Scene s;
  s.band_id = band;
  s.year = year;
  s.month = month;
  s.values = RasterGrid(geom());
  s.values.fill(value);
  s.qa = RasterGrid(geom());
  s.qa.fill(qa);
  return s;
}

RasterGrid constant_grid(double v, int w = 3, int h = 3) {
  RasterGrid g(geom(w, h));
  g.fill(v);
  return g;
}

}  // namespace

TEST_CASE("monthly median composites QA-valid observations") {
  TimeStack stack;
  stack.add(scene("B4", 2001, 6, 0.2));
  stack.add(scene("B4", 2002, 6, 0.5));
  stack.add(scene("B4", 2003, 6, 0.9));
  stack.add(scene("B4", 2001, 7, 0.2));
  stack.add(scene("B4", 2002, 7, 0.4));
  stack.add(scene("B4", 2001, 8, 0.7, 0.0));  // fully masked month

  const auto monthlies = monthly_median_composite(stack, "B4", 2000, 2010);
  REQUIRE(monthlies.size() == 12);
  CHECK(monthlies[5].at(1, 1) == doctest::Approx(0.5));   // odd count
  CHECK(monthlies[6].at(1, 1) == doctest::Approx(0.3));   // even count: mean of middle
  CHECK(monthlies[7].is_nodata(monthlies[7].at(1, 1)));   // masked
  CHECK(monthlies[0].is_nodata(monthlies[0].at(0, 0)));   // absent month
}

TEST_CASE("compositing is invariant to scene order") {
  RngStream rng(5);
  std::vector<Scene> scenes;
  for (int year = 2001; year <= 2004; ++year)
    for (int month : {3, 6}) {
      Scene s = scene("B4", year, month, 0.0);
      for (size_t i = 0; i < s.values.size(); ++i) {
        s.values.set_flat(i, rng.next_double());
        s.qa.set_flat(i, rng.next_double() < 0.3 ? 0.0 : 1.0);
      }
      scenes.push_back(std::move(s));
    }
  TimeStack forward, backward;
  for (const auto& s : scenes) forward.add(s);
  for (auto it = scenes.rbegin(); it != scenes.rend(); ++it) backward.add(*it);
  const auto a = monthly_median_composite(forward, "B4", 2000, 2010);
  const auto b = monthly_median_composite(backward, "B4", 2000, 2010);
  for (int m = 0; m < 12; ++m)
    for (size_t i = 0; i < a[m].size(); ++i) CHECK(a[m][i] == b[m][i]);
}

TEST_CASE("vegetation indices") {
  SUBCASE("NDVI hand value") {
    const auto ndvi = vegetation_index(constant_grid(0.1), constant_grid(0.5), nullptr,
                                       nullptr, VegIndex::NDVI);
    CHECK(ndvi.at(0, 0) == doctest::Approx(0.4 / 0.6).epsilon(1e-12));
  }
  SUBCASE("NDVI symmetry zero") {
    const auto ndvi = vegetation_index(constant_grid(0.3), constant_grid(0.3), nullptr,
                                       nullptr, VegIndex::NDVI);
    CHECK(ndvi.at(0, 0) == doctest::Approx(0.0));
  }
  SUBCASE("singular denominator gives nodata") {
    const auto ndvi = vegetation_index(constant_grid(0.0), constant_grid(0.0), nullptr,
                                       nullptr, VegIndex::NDVI);
    CHECK(ndvi.is_nodata(ndvi.at(0, 0)));
  }
  SUBCASE("EVI formula") {
    const RasterGrid red = constant_grid(0.1), nir = constant_grid(0.5),
                     blue = constant_grid(0.05);
    const auto evi = vegetation_index(red, nir, &blue, nullptr, VegIndex::EVI);
    const double expected = 2.5 * 0.4 / (0.5 + 0.6 - 0.375 + 1.0);
    CHECK(evi.at(1, 1) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("NDWI formula and range") {
    const RasterGrid nir = constant_grid(0.5), swir = constant_grid(0.2);
    const auto ndwi =
        vegetation_index(constant_grid(0.1), nir, nullptr, &swir, VegIndex::NDWI);
    CHECK(ndwi.at(0, 0) == doctest::Approx(0.3 / 0.7).epsilon(1e-12));
    CHECK(ndwi.at(0, 0) <= 1.0);
    CHECK(ndwi.at(0, 0) >= -1.0);
  }
  SUBCASE("missing required band") {
    CHECK_THROWS_AS(vegetation_index(constant_grid(0.1), constant_grid(0.5), nullptr, nullptr,
                                     VegIndex::EVI),
                    Error);
  }
  SUBCASE("nodata input propagates") {
    RasterGrid red = constant_grid(0.1);
    red.set(0, 0, red.nodata());
    const auto ndvi =
        vegetation_index(red, constant_grid(0.5), nullptr, nullptr, VegIndex::NDVI);
    CHECK(ndvi.is_nodata(ndvi.at(0, 0)));
    CHECK(!ndvi.is_nodata(ndvi.at(1, 1)));
  }
}

TEST_CASE("annual summary statistics") {
  auto monthlies_of = [](const std::vector<double>& values) {
    std::vector<RasterGrid> grids;
    for (double v : values) grids.push_back(constant_grid(v));
    return grids;
  };
  SUBCASE("constant series") {
    const auto s = annual_summary(monthlies_of(std::vector<double>(12, 0.4)));
    CHECK(s.max.at(0, 0) == doctest::Approx(0.4));
    CHECK(s.min.at(0, 0) == doctest::Approx(0.4));
    CHECK(s.std.at(0, 0) == doctest::Approx(0.0));
    CHECK(s.sum.at(0, 0) == doctest::Approx(4.8));
  }
  SUBCASE("eleven zeros and a one") {
    std::vector<double> v(12, 0.0);
    v[11] = 1.0;
    const auto s = annual_summary(monthlies_of(v));
    CHECK(s.max.at(0, 0) == doctest::Approx(1.0));
    CHECK(s.min.at(0, 0) == doctest::Approx(0.0));
    CHECK(s.sum.at(0, 0) == doctest::Approx(1.0));
    CHECK(s.std.at(0, 0) == doctest::Approx(0.27638539919628335).epsilon(1e-12));
  }
  SUBCASE("single valid month leaves std nodata") {
    std::vector<RasterGrid> grids;
    grids.push_back(constant_grid(0.7));
    for (int m = 1; m < 12; ++m) {
      RasterGrid g(geom());
      grids.push_back(g);  // all nodata
    }
    const auto s = annual_summary(grids);
    CHECK(s.max.at(0, 0) == doctest::Approx(0.7));
    CHECK(s.std.is_nodata(s.std.at(0, 0)));
    CHECK(s.sum.at(0, 0) == doctest::Approx(0.7));
  }
  SUBCASE("min <= mean <= max and sum identity") {
    RngStream rng(9);
    std::vector<RasterGrid> grids;
    for (int m = 0; m < 12; ++m) {
      RasterGrid g(geom());
      for (size_t i = 0; i < g.size(); ++i)
        if (rng.next_double() < 0.8) g.set_flat(i, rng.next_double());
      grids.push_back(std::move(g));
    }
    const auto s = annual_summary(grids);
    for (size_t i = 0; i < s.max.size(); ++i) {
      if (s.max.is_nodata(s.max[i])) continue;
      int count = 0;
      for (const auto& g : grids)
        if (!g.is_nodata(g[i])) ++count;
      const double mean = s.sum[i] / count;
      CHECK(s.min[i] <= mean + 1e-12);
      CHECK(mean <= s.max[i] + 1e-12);
    }
  }
}

TEST_CASE("mode composite") {
  auto grid_of = [](double v) { return constant_grid(v); };
  SUBCASE("clear majority") {
    const auto mode = mode_composite({grid_of(6), grid_of(6), grid_of(5)});
    CHECK(mode.at(0, 0) == doctest::Approx(6));
  }
  SUBCASE("tie goes to the lowest code") {
    const auto mode = mode_composite({grid_of(1), grid_of(2)});
    CHECK(mode.at(0, 0) == doctest::Approx(1));
  }
  SUBCASE("all nodata") {
    RasterGrid empty(geom());
    const auto mode = mode_composite({empty, empty});
    CHECK(mode.is_nodata(mode.at(0, 0)));
  }
  SUBCASE("output codes are a subset of input codes") {
    RngStream rng(13);
    std::vector<RasterGrid> years;
    for (int y = 0; y < 5; ++y) {
      RasterGrid g(geom());
      for (size_t i = 0; i < g.size(); ++i)
        g.set_flat(i, static_cast<double>(1 + rng.next_below(4)));
      years.push_back(std::move(g));
    }
    const auto mode = mode_composite(years);
    for (size_t i = 0; i < mode.size(); ++i) {
      bool found = false;
      for (const auto& y : years)
        if (y[i] == mode[i]) found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("bilinear resampling") {
  RasterGeometry src = geom(4, 4, 0.02);
  SUBCASE("coincident centers reproduce source values") {
    RasterGrid grid(src);
    RngStream rng(17);
    for (size_t i = 0; i < grid.size(); ++i) grid.set_flat(i, rng.next_double());
    const auto out = bilinear_resample(grid, src);
    for (int r = 1; r < 3; ++r)
      for (int c = 1; c < 3; ++c) CHECK(out.at(r, c) == doctest::Approx(grid.at(r, c)));
  }
  SUBCASE("midpoint of an axis-aligned step is the average") {
    RasterGrid grid(src);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) grid.set(r, c, r < 2 ? 0.0 : 1.0);
    RasterGeometry target = src;
    target.pixel_size = 0.02;
    target.origin_y = src.origin_y - 0.01;  // shift half a pixel south
    target.height = 3;
    const auto out = bilinear_resample(grid, target);
    CHECK(out.at(1, 1) == doctest::Approx(0.5));
  }
  SUBCASE("constant source stays constant") {
    RasterGrid grid(src);
    grid.fill(3.25);
    RasterGeometry target = geom(6, 6, 0.01);
    target.origin_x = src.origin_x + 0.01;
    target.origin_y = src.origin_y - 0.01;
    const auto out = bilinear_resample(grid, target);
    for (size_t i = 0; i < out.size(); ++i)
      if (!out.is_nodata(out[i])) CHECK(out[i] == doctest::Approx(3.25));
  }
  SUBCASE("planar ramp is reproduced to 1e-12 relative") {
    RasterGrid grid(src);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        grid.set(r, c, 2.0 * src.center_x(c) - 3.0 * src.center_y(r) + 1.0);
    RasterGeometry target = geom(5, 5, 0.012);
    target.origin_x = src.origin_x + 0.008;
    target.origin_y = src.origin_y - 0.008;
    const auto out = bilinear_resample(grid, target);
    for (int r = 0; r < target.height; ++r)
      for (int c = 0; c < target.width; ++c) {
        const double v = out.at(r, c);
        if (out.is_nodata(v)) continue;
        const double expected = 2.0 * target.center_x(c) - 3.0 * target.center_y(r) + 1.0;
        CHECK(v == doctest::Approx(expected).epsilon(1e-12));
      }
  }
  SUBCASE("nodata corner poisons the output pixel") {
    RasterGrid grid(src);
    grid.fill(1.0);
    grid.set(1, 1, grid.nodata());
    RasterGeometry target = src;
    target.origin_x += 0.01;
    target.origin_y -= 0.01;
    target.width = 3;
    target.height = 3;
    const auto out = bilinear_resample(grid, target);
    CHECK(out.is_nodata(out.at(0, 0)));
    CHECK(out.at(2, 2) == doctest::Approx(1.0));
  }
  SUBCASE("disjoint extents are an error") {
    RasterGrid grid(src);
    RasterGeometry target = src;
    target.origin_x += 10.0;
    CHECK_THROWS_AS(bilinear_resample(grid, target), Error);
  }
}

TEST_CASE("feature standardization") {
  SUBCASE("population z-scores") {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    const auto stats = standardize_features(X);
    CHECK(X(0, 0) == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(X(1, 0) == doctest::Approx(0.0));
    CHECK(X(2, 0) == doctest::Approx(1.224744871391589).epsilon(1e-12));
    CHECK(stats.zero_variance[0] == 0);
  }
  SUBCASE("constant feature maps to zero and is flagged") {
    Eigen::MatrixXd X(3, 2);
    X << 1, 5, 2, 5, 3, 5;
    const auto stats = standardize_features(X);
    CHECK(stats.zero_variance[1] == 1);
    CHECK(X(0, 1) == 0.0);
    CHECK(X(2, 1) == 0.0);
  }
  SUBCASE("returned stats reproduce the transform") {
    Eigen::MatrixXd X(4, 3);
    RngStream rng(23);
    for (int i = 0; i < 12; ++i) X(i / 3, i % 3) = rng.next_normal() * 3 + 1;
    Eigen::MatrixXd X1 = X, X2 = X;
    const auto stats = standardize_features(X1);
    standardize_features(X2, stats);
    CHECK((X1 - X2).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}
