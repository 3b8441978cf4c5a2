#include "urbanfn/bsqf.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"
#include "urbanfn/io.hpp"

namespace urbanfn {

static_assert(std::endian::native == std::endian::little,
              "BSQF payloads are written in host order; big-endian hosts need byte swapping");

using nlohmann::json;

std::filesystem::path bsqf_base(const std::filesystem::path& path) {
  auto ext = path.extension();
  if (ext == ".json" || ext == ".bin" || ext == ".bsqf") {
    auto p = path;
    return p.replace_extension();
  }
  return path;
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  auto p = base;
  p += suffix;
  return p;
}

}  // namespace

void write_bsqf(const std::filesystem::path& path, const RasterGrid& raster) {
  auto base = bsqf_base(path);
  const auto& t = raster.transform();
  json header = {
      {"width", raster.width()},
      {"height", raster.height()},
      {"bands", raster.bands()},
      {"transform",
       {{"origin_x", t.origin_x}, {"origin_y", t.origin_y}, {"px", t.pixel_size_x},
        {"py", t.pixel_size_y}}},
      {"nodata", raster.nodata ? json(*raster.nodata) : json(nullptr)},
      {"band_names", raster.band_names},
  };
  const auto& data = raster.data();
  std::string bytes(data.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), data.data(), bytes.size());
  write_file_atomic(with_suffix(base, ".bin"), bytes);
  write_file_atomic(with_suffix(base, ".json"), header.dump(2) + "\n");
}

RasterGrid read_bsqf(const std::filesystem::path& path) {
  auto base = bsqf_base(path);
  json header;
  try {
    header = json::parse(read_file(with_suffix(base, ".json")));
  } catch (const json::exception& e) {
    throw DataError("bad BSQF header " + base.string() + ": " + e.what());
  }
  GridSpec grid;
  int bands = 0;
  std::vector<std::string> names;
  std::optional<float> nodata;
  try {
    grid.width = header.at("width").get<int>();
    grid.height = header.at("height").get<int>();
    bands = header.at("bands").get<int>();
    const auto& t = header.at("transform");
    grid.transform = {t.at("origin_x").get<double>(), t.at("origin_y").get<double>(),
                      t.at("px").get<double>(), t.at("py").get<double>()};
    if (header.contains("nodata") && !header["nodata"].is_null())
      nodata = header["nodata"].get<float>();
    if (header.contains("band_names")) names = header["band_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("bad BSQF header " + base.string() + ": " + e.what());
  }
  std::string bytes = read_file(with_suffix(base, ".bin"));
  std::size_t expected = grid.pixels() * std::size_t(std::max(bands, 0)) * sizeof(float);
  if (bytes.size() != expected)
    throw DataError("BSQF payload " + base.string() + ".bin has " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(expected));
  std::vector<float> data(bytes.size() / sizeof(float));
  std::memcpy(data.data(), bytes.data(), bytes.size());
  RasterGrid r(grid, bands, std::move(data));
  r.nodata = nodata;
  r.band_names = std::move(names);
  return r;
}

}  // namespace urbanfn
