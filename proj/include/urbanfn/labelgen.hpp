#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "urbanfn/polygon.hpp"
#include "urbanfn/raster.hpp"

namespace urbanfn {

enum class FunctionClass : std::uint8_t {
  Background = 0,
  Residential = 1,
  Commercial = 2,
  PublicService = 3,
  PublicHealth = 4,
  SportArt = 5,
  Educational = 6,
  Industrial = 7,
  UnlabeledBuilding = 255,
};

inline constexpr int kNumClasses = 8;  // background + 7 functions
inline constexpr int kUnlabeled = 255;

constexpr int code(FunctionClass c) { return static_cast<int>(c); }
std::string_view class_name(FunctionClass c);
std::optional<FunctionClass> class_from_code(int code);
std::optional<FunctionClass> class_from_name(std::string_view name);
constexpr bool is_function(int code) { return code >= 1 && code <= 7; }

// AOI tag string -> function class (codes 1..7 only).
class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::map<std::string, int> entries);

  static ClassMap defaults();
  static ClassMap from_json(const std::string& text);
  std::string to_json() const;

  std::optional<FunctionClass> lookup(const std::string& tag) const;
  const std::map<std::string, int>& entries() const { return entries_; }
  // Tags that map to `c`, in lexical order.
  std::vector<std::string> tags_for(FunctionClass c) const;

 private:
  std::map<std::string, int> entries_;
};

// Attribute key holding an AOI's function tag.
inline constexpr const char* kAoiTagKey = "fclass";

struct RemapResult {
  std::optional<FunctionClass> cls;
  std::string diagnostic;  // set when cls is empty
};

RemapResult remap_aoi(const std::map<std::string, std::string>& tags, const ClassMap& cm);

struct AssignedBuilding {
  Polygon footprint;
  int code;  // 1..7 or 255
};

struct AssignResult {
  std::vector<AssignedBuilding> buildings;
  std::vector<std::string> diagnostics;
};

// Gives each building the class of the AOI it overlaps most; ties go to the
// lower class code, no overlap gives 255. Output order follows `buildings`;
// invalid buildings are dropped with a diagnostic.
AssignResult assign_building_functions(const std::vector<Polygon>& buildings,
                                       const std::vector<std::pair<Polygon, FunctionClass>>& aois,
                                       double fallback_cell = 0.25);

// Labels Y' and supervision mask G.
struct LabelRaster {
  RasterGrid labels;
  RasterGrid supervision;
};

// Throws DataError when supervision is not exactly (labels != 255).
void check_label_raster(const LabelRaster& lr);

struct LabelRasterResult {
  LabelRaster raster;
  std::vector<std::string> diagnostics;
};

// Background is 0. Unlabeled buildings are painted first and labeled ones
// last, larger before smaller within each group, so small labeled buildings
// stay visible.
LabelRasterResult build_label_raster(const std::vector<AssignedBuilding>& assigned,
                                     const GridSpec& grid);

// Baseline labelling that ignores the unknown-function mask: 255 becomes
// background and every pixel is supervised.
LabelRaster treat_unlabeled_as_background(const LabelRaster& lr);

}  // namespace urbanfn
