#include "traitscale/raster.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "TSR writer assumes a little-endian host");

namespace traitscale {

using nlohmann::json;

void write_tsr_planes(const std::filesystem::path& path, const std::vector<RasterGrid>& planes,
                      const TsrHeader& header) {
  if (planes.empty()) throw Error("write_tsr: no planes");
  const RasterGeometry& geom = planes.front().geometry();
  for (const auto& p : planes)
    if (!p.geometry().same_grid(geom)) throw Error("write_tsr: plane geometry mismatch");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write raster: " + path.string());
  std::vector<float> buf(geom.pixel_count());
  for (const auto& plane : planes) {
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(plane[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw Error("failed writing raster payload: " + path.string());
  out.close();

  json h;
  h["width"] = geom.width;
  h["height"] = geom.height;
  h["origin_x"] = geom.origin_x;
  h["origin_y"] = geom.origin_y;
  h["pixel_size"] = geom.pixel_size;
  h["crs_tag"] = geom.crs_tag;
  h["nodata"] = planes.front().nodata();
  h["band_id"] = header.band_id;
  h["timestamp"] = header.timestamp;
  if (planes.size() > 1) h["n_bands"] = planes.size();
  if (!header.class_codes.empty()) h["class_codes"] = header.class_codes;

  std::ofstream hout(path.string() + ".json");
  if (!hout) throw Error("cannot write raster header: " + path.string() + ".json");
  hout << h.dump(2) << "\n";
}

void write_tsr(const std::filesystem::path& path, const RasterGrid& grid,
               const TsrHeader& header) {
  write_tsr_planes(path, {grid}, header);
}

TsrFile read_tsr(const std::filesystem::path& path) {
  std::ifstream hin(path.string() + ".json");
  if (!hin) throw Error("missing raster header: " + path.string() + ".json");
  json h = json::parse(hin, nullptr, true);

  RasterGeometry geom;
  geom.width = h.at("width").get<int>();
  geom.height = h.at("height").get<int>();
  geom.origin_x = h.at("origin_x").get<double>();
  geom.origin_y = h.at("origin_y").get<double>();
  geom.pixel_size = h.at("pixel_size").get<double>();
  geom.crs_tag = h.at("crs_tag").get<std::string>();
  const double nodata = h.at("nodata").get<double>();

  TsrFile file;
  file.header.band_id = h.value("band_id", "");
  file.header.timestamp = h.value("timestamp", "");
  file.header.n_bands = h.value("n_bands", 1);
  if (h.contains("class_codes"))
    file.header.class_codes = h.at("class_codes").get<std::map<std::string, int>>();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open raster: " + path.string());
  const size_t plane_px = geom.pixel_count();
  std::vector<float> buf(plane_px);
  for (int b = 0; b < file.header.n_bands; ++b) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(plane_px * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != plane_px * sizeof(float))
      throw Error("raster payload truncated: " + path.string());
    RasterGrid grid(geom, nodata);
    for (size_t i = 0; i < plane_px; ++i) grid.set_flat(i, static_cast<double>(buf[i]));
    file.planes.push_back(std::move(grid));
  }
  char probe = 0;
  if (in.read(&probe, 1).gcount() != 0)
    throw Error("raster payload larger than header declares: " + path.string());
  return file;
}

}  // namespace traitscale
