#include "urbanfn/geojson.hpp"

#include "json.hpp"
#include "urbanfn/error.hpp"
#include "urbanfn/io.hpp"

namespace urbanfn {

using nlohmann::json;

namespace {

Ring parse_ring(const json& coords) {
  Ring r;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2) throw DataError("GeoJSON: malformed coordinate");
    r.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  return r;
}

json ring_json(const Ring& r) {
  json out = json::array();
  for (const auto& v : close_ring(r)) out.push_back({v.x, v.y});
  return out;
}

}  // namespace

std::vector<Polygon> parse_geojson(const std::string& text) {
  std::vector<Polygon> out;
  try {
    json doc = json::parse(text);
    if (doc.value("type", "") != "FeatureCollection")
      throw DataError("GeoJSON: expected a FeatureCollection");
    for (const auto& f : doc.at("features")) {
      const auto& g = f.at("geometry");
      if (g.at("type").get<std::string>() != "Polygon")
        throw DataError("GeoJSON: only Polygon geometries are supported");
      const auto& rings = g.at("coordinates");
      if (rings.empty()) throw DataError("GeoJSON: polygon without rings");
      Polygon p;
      p.exterior = parse_ring(rings[0]);
      for (std::size_t i = 1; i < rings.size(); ++i) p.holes.push_back(parse_ring(rings[i]));
      if (f.contains("properties") && f["properties"].is_object()) {
        for (const auto& [k, v] : f["properties"].items())
          p.attributes[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      out.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("GeoJSON: ") + e.what());
  }
  return out;
}

std::string to_geojson(const std::vector<Polygon>& polys) {
  json features = json::array();
  for (const auto& p : polys) {
    json rings = json::array({ring_json(p.exterior)});
    for (const auto& h : p.holes) rings.push_back(ring_json(h));
    json props = json::object();
    for (const auto& [k, v] : p.attributes) props[k] = v;
    features.push_back({{"type", "Feature"},
                        {"properties", props},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump() + "\n";
}

std::vector<Polygon> read_geojson(const std::filesystem::path& path) {
  return parse_geojson(read_file(path));
}

void write_geojson(const std::filesystem::path& path, const std::vector<Polygon>& polys) {
  write_file_atomic(path, to_geojson(polys));
}

}  // namespace urbanfn
