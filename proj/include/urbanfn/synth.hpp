#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "urbanfn/labelgen.hpp"
#include "urbanfn/polygon.hpp"
#include "urbanfn/raster.hpp"

namespace urbanfn {

// Appearance of one function class in the three modalities.
struct ClassProfile {
  double height_mean;  // m
  double height_std;
  double ntl_mean;  // radiance, arbitrary units
  double ntl_std;
  std::array<double, 3> roof_rgb;
  std::array<double, 3> ntl_ratio;  // per NTL band, mean 1
  int cell;  // building lot pitch inside a block, pixels
};

struct CitySpec {
  int tile_size = 512;
  int tiles_x = 5;
  int tiles_y = 2;
  int block_size = 64;
  int road_width = 6;
  double coarse_resolution = 10.0;  // BH and NTL grid, m
  // Area shares of Residential..Industrial among building pixels.
  std::array<double, 7> proportions{0.5006, 0.0482, 0.0043, 0.0176, 0.0285, 0.0484, 0.3524};
  double aoi_coverage = 0.30;
  double lot_occupancy = 0.85;
  std::array<ClassProfile, 7> profiles = default_profiles();
  std::array<double, 3> ground_rgb{95, 110, 80};
  std::array<double, 3> road_rgb{70, 70, 70};
  double oi_noise = 12.0;
  double roof_jitter = 12.0;
  double bh_noise = 1.5;
  double ntl_noise = 3.0;
  std::uint64_t seed = 42;

  static std::array<ClassProfile, 7> default_profiles();
  void validate() const;
  static CitySpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SynthTile {
  int tile_id = 0;
  int tx = 0, ty = 0;
  RasterGrid oi;   // 3 bands, 1 m
  RasterGrid bh;   // 1 band, coarse
  RasterGrid ntl;  // 3 bands, coarse
  LabelRaster truth;
  LabelRaster weak;
  std::vector<Polygon> buildings;  // attributes: building_id, height, truth_class
  std::vector<int> truth_codes;
  std::vector<Polygon> aois;  // attribute kAoiTagKey
};

// Lays out function blocks across the whole city so class areas track the
// target proportions, places rectangular buildings per block and renders the
// optical, height and nighttime-light rasters. Weak labels come from AOIs over
// a random aoi_coverage share of buildings, run through the labelgen path.
std::vector<SynthTile> generate_city(const CitySpec& spec);

GridSpec tile_grid(const CitySpec& spec, int tx, int ty);
GridSpec coarse_grid(const CitySpec& spec, int tx, int ty);

struct TruthReport {
  std::array<double, 7> proportions{};  // building-pixel area shares of classes 1..7
  std::int64_t building_count = 0;      // from polygons
  double building_area_m2 = 0.0;        // polygon areas
  std::int64_t building_pixels = 0;
};

TruthReport truth_report(const std::vector<SynthTile>& tiles);
nlohmann::json to_json(const TruthReport& r);

// Share of truth building pixels classified correctly by assigning each pixel
// the class profile nearest in standardized (height, mean NTL) space.
double nearest_profile_accuracy(const std::vector<SynthTile>& tiles, const CitySpec& spec);

// On-disk layout: <dir>/city.json and <dir>/tile_<id>/{oi,bh,ntl,truth_labels,
// truth_supervision}.{json,bin} plus buildings.geojson and aois.geojson.
void write_city(const std::filesystem::path& dir, const CitySpec& spec,
                const std::vector<SynthTile>& tiles, int holdout_tiles);

std::string tile_dir_name(int tile_id);

}  // namespace urbanfn
