#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "traitscale/error.hpp"
#include "traitscale/schema.hpp"

namespace traitscale {

/// North-up grid geometry. (origin_x, origin_y) is the map coordinate of
/// the top-left corner; row indices grow southward, so the center of
/// pixel (row, col) is
///   x = origin_x + (col + 0.5) * pixel_size
///   y = origin_y - (row + 0.5) * pixel_size
struct RasterGeometry {
  int width = 0;
  int height = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel_size = 1.0;
  std::string crs_tag = "synthetic-latlon";

  bool same_grid(const RasterGeometry& o) const {
    return width == o.width && height == o.height && origin_x == o.origin_x &&
           origin_y == o.origin_y && pixel_size == o.pixel_size && crs_tag == o.crs_tag;
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  double center_x(int col) const { return origin_x + (col + 0.5) * pixel_size; }
  double center_y(int row) const { return origin_y - (row + 0.5) * pixel_size; }
};

/// One band of georeferenced values with a nodata sentinel. Values are
/// doubles in memory; the TSR container stores 32-bit floats.
class RasterGrid {
 public:
  RasterGrid() = default;
  RasterGrid(RasterGeometry geom, double nodata = kDefaultNodata)
      : geom_(std::move(geom)), nodata_(nodata), values_(geom_.pixel_count(), nodata) {
    if (geom_.width <= 0 || geom_.height <= 0) throw Error("RasterGrid: empty geometry");
    if (!(geom_.pixel_size > 0.0)) throw Error("RasterGrid: pixel_size must be positive");
  }

  static constexpr double kDefaultNodata = -9999.0;

  const RasterGeometry& geometry() const { return geom_; }
  double nodata() const { return nodata_; }
  int width() const { return geom_.width; }
  int height() const { return geom_.height; }
  size_t size() const { return values_.size(); }

  double at(int row, int col) const { return values_[index(row, col)]; }
  void set(int row, int col, double v) { values_[index(row, col)] = v; }
  double operator[](size_t i) const { return values_[i]; }
  void set_flat(size_t i, double v) { values_[i] = v; }

  bool is_nodata(double v) const {
    if (std::isnan(nodata_)) return std::isnan(v);
    return v == nodata_ || std::isnan(v);
  }
  bool valid_at(size_t i) const { return !is_nodata(values_[i]); }

  void fill(double v) { values_.assign(values_.size(), v); }
  const std::vector<double>& values() const { return values_; }

  size_t index(int row, int col) const {
    return static_cast<size_t>(row) * geom_.width + col;
  }

 private:
  RasterGeometry geom_;
  double nodata_ = kDefaultNodata;
  std::vector<double> values_;
};

/// Sidecar metadata for a TSR file. `extra` carries optional fields such
/// as the class_codes map of classification rasters.
struct TsrHeader {
  std::string band_id;
  std::string timestamp;
  int n_bands = 1;
  std::map<std::string, int> class_codes;
};

inline TsrHeader make_header(std::string band_id, std::string timestamp = "") {
  TsrHeader h;
  h.band_id = std::move(band_id);
  h.timestamp = std::move(timestamp);
  return h;
}

/// TSR container: `<path>` holds row-major little-endian float32 planes,
/// `<path>.json` the header. Round trips preserve float32 payloads
/// bit-exactly.
void write_tsr(const std::filesystem::path& path, const RasterGrid& grid,
               const TsrHeader& header = {});
void write_tsr_planes(const std::filesystem::path& path, const std::vector<RasterGrid>& planes,
                      const TsrHeader& header = {});

struct TsrFile {
  std::vector<RasterGrid> planes;
  TsrHeader header;

  const RasterGrid& single() const {
    if (planes.size() != 1) throw Error("TSR: expected a single-band file");
    return planes.front();
  }
};

TsrFile read_tsr(const std::filesystem::path& path);

}  // namespace traitscale
