#include "urbanfn/labelgen.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "urbanfn/rasterize.hpp"

namespace urbanfn {

namespace {

constexpr std::array<std::pair<FunctionClass, std::string_view>, 9> kNames{{
    {FunctionClass::Background, "Background"},
    {FunctionClass::Residential, "Residential"},
    {FunctionClass::Commercial, "Commercial"},
    {FunctionClass::PublicService, "PublicService"},
    {FunctionClass::PublicHealth, "PublicHealth"},
    {FunctionClass::SportArt, "SportArt"},
    {FunctionClass::Educational, "Educational"},
    {FunctionClass::Industrial, "Industrial"},
    {FunctionClass::UnlabeledBuilding, "UnlabeledBuilding"},
}};

}  // namespace

std::string_view class_name(FunctionClass c) {
  for (auto [k, n] : kNames)
    if (k == c) return n;
  return "?";
}

std::optional<FunctionClass> class_from_code(int value) {
  for (auto [k, n] : kNames)
    if (code(k) == value) return k;
  return std::nullopt;
}

std::optional<FunctionClass> class_from_name(std::string_view name) {
  for (auto [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

ClassMap::ClassMap(std::map<std::string, int> entries) : entries_(std::move(entries)) {
  for (const auto& [tag, c] : entries_)
    if (!is_function(c))
      throw DataError("class map: tag '" + tag + "' maps to " + std::to_string(c) +
                      ", expected a function code 1..7");
}

ClassMap ClassMap::defaults() {
  // Illustrative unification of common OSM-style AOI tags.
  return ClassMap({
      {"residential", 1}, {"apartments", 1}, {"house", 1}, {"dormitory", 1}, {"villa", 1},
      {"commercial", 2}, {"retail", 2}, {"market", 2}, {"department", 2}, {"mall", 2},
      {"supermarket", 2}, {"hotel", 2}, {"office", 2}, {"restaurant", 2}, {"bank", 2},
      {"public", 3}, {"government", 3}, {"police", 3}, {"fire_station", 3}, {"post_office", 3},
      {"townhall", 3}, {"library", 3}, {"courthouse", 3},
      {"hospital", 4}, {"clinic", 4}, {"doctors", 4}, {"pharmacy", 4}, {"nursing_home", 4},
      {"cinema", 5}, {"theatre", 5}, {"museum", 5}, {"stadium", 5}, {"sports_centre", 5},
      {"arts_centre", 5}, {"gallery", 5}, {"gym", 5},
      {"school", 6}, {"university", 6}, {"college", 6}, {"kindergarten", 6},
      {"research_institute", 6},
      {"industrial", 7}, {"factory", 7}, {"warehouse", 7}, {"works", 7}, {"manufacture", 7},
      {"logistics", 7},
  });
}

ClassMap ClassMap::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw DataError("class map: expected a JSON object {tag: code}");
    std::map<std::string, int> m;
    for (const auto& [k, v] : j.items()) m[k] = v.get<int>();
    return ClassMap(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("class map: ") + e.what());
  }
}

std::string ClassMap::to_json() const { return nlohmann::json(entries_).dump(2) + "\n"; }

std::optional<FunctionClass> ClassMap::lookup(const std::string& tag) const {
  auto it = entries_.find(tag);
  if (it == entries_.end()) return std::nullopt;
  return class_from_code(it->second);
}

std::vector<std::string> ClassMap::tags_for(FunctionClass c) const {
  std::vector<std::string> out;
  for (const auto& [tag, v] : entries_)
    if (v == code(c)) out.push_back(tag);
  return out;
}

RemapResult remap_aoi(const std::map<std::string, std::string>& tags, const ClassMap& cm) {
  auto it = tags.find(kAoiTagKey);
  if (it == tags.end()) return {std::nullopt, std::string("AOI has no '") + kAoiTagKey + "' tag"};
  if (auto c = cm.lookup(it->second)) return {c, {}};
  return {std::nullopt, "unmapped AOI tag '" + it->second + "'"};
}

AssignResult assign_building_functions(const std::vector<Polygon>& buildings,
                                       const std::vector<std::pair<Polygon, FunctionClass>>& aois,
                                       double fallback_cell) {
  AssignResult out;
  std::vector<std::pair<Polygon, int>> valid_aois;
  std::vector<BoundingBox> aoi_boxes;
  for (std::size_t i = 0; i < aois.size(); ++i) {
    if (auto defect = polygon_defect(aois[i].first)) {
      out.diagnostics.push_back("aoi " + std::to_string(i) + ": " + *defect);
      continue;
    }
    valid_aois.emplace_back(normalized(aois[i].first), code(aois[i].second));
    aoi_boxes.push_back(bounds(valid_aois.back().first.exterior));
  }

  for (std::size_t b = 0; b < buildings.size(); ++b) {
    if (auto defect = polygon_defect(buildings[b])) {
      out.diagnostics.push_back("building " + std::to_string(b) + ": " + *defect);
      continue;
    }
    Polygon fp = normalized(buildings[b]);
    BoundingBox box = bounds(fp.exterior);
    double best_area = 0.0;
    int best = kUnlabeled;
    for (std::size_t a = 0; a < valid_aois.size(); ++a) {
      if (!box.intersects(aoi_boxes[a])) continue;
      double ov = overlap_area(fp, valid_aois[a].first, fallback_cell);
      int c = valid_aois[a].second;
      if (ov <= 0.0) continue;
      if (ov > best_area || (ov == best_area && c < best)) {
        best_area = ov;
        best = c;
      }
    }
    out.buildings.push_back({std::move(fp), best});
  }
  return out;
}

void check_label_raster(const LabelRaster& lr) {
  if (!(lr.labels.grid() == lr.supervision.grid()))
    throw DataError("label raster: labels and supervision grids differ");
  const auto& l = lr.labels.data();
  const auto& g = lr.supervision.data();
  for (std::size_t i = 0; i < l.size(); ++i) {
    int v = int(l[i]);
    if (float(v) != l[i] || !(v == kUnlabeled || (v >= 0 && v < kNumClasses)))
      throw DataError("label raster: invalid label value " + std::to_string(l[i]));
    float expected = v == kUnlabeled ? 0.0f : 1.0f;
    if (g[i] != expected) throw DataError("label raster: supervision inconsistent with labels");
  }
}

LabelRasterResult build_label_raster(const std::vector<AssignedBuilding>& assigned,
                                     const GridSpec& grid) {
  std::vector<std::size_t> order(assigned.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> areas(assigned.size());
  for (std::size_t i = 0; i < assigned.size(); ++i) areas[i] = area(assigned[i].footprint);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    bool la = assigned[a].code != kUnlabeled, lb = assigned[b].code != kUnlabeled;
    if (la != lb) return !la;
    if (areas[a] != areas[b]) return areas[a] > areas[b];
    return assigned[a].code < assigned[b].code;
  });

  std::vector<std::pair<Polygon, float>> polys;
  polys.reserve(order.size());
  LabelRasterResult out;
  for (std::size_t i : order) {
    int c = assigned[i].code;
    if (!(is_function(c) || c == kUnlabeled)) {
      out.diagnostics.push_back("building " + std::to_string(i) + ": invalid class " +
                                std::to_string(c));
      continue;
    }
    polys.emplace_back(assigned[i].footprint, float(c));
  }
  auto burned = rasterize_polygons(polys, grid, 0.0f);
  for (auto& d : burned.diagnostics) out.diagnostics.push_back(std::move(d));

  RasterGrid supervision(grid, 1, 1.0f);
  const auto& l = burned.raster.data();
  auto& g = supervision.data();
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l[i] == float(kUnlabeled)) g[i] = 0.0f;
  burned.raster.band_names = {"labels"};
  supervision.band_names = {"supervision"};
  out.raster = {std::move(burned.raster), std::move(supervision)};
  return out;
}

LabelRaster treat_unlabeled_as_background(const LabelRaster& lr) {
  LabelRaster out = lr;
  for (float& v : out.labels.data())
    if (v == float(kUnlabeled)) v = 0.0f;
  std::fill(out.supervision.data().begin(), out.supervision.data().end(), 1.0f);
  return out;
}

}  // namespace urbanfn
