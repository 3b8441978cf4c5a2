#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "urbanfn/polygon.hpp"

namespace urbanfn {

// FeatureCollection subset: Polygon geometries in planar meters. Property
// values are kept as strings; non-string JSON values keep their JSON text.
std::vector<Polygon> parse_geojson(const std::string& text);
std::string to_geojson(const std::vector<Polygon>& polys);

std::vector<Polygon> read_geojson(const std::filesystem::path& path);
void write_geojson(const std::filesystem::path& path, const std::vector<Polygon>& polys);

}  // namespace urbanfn
