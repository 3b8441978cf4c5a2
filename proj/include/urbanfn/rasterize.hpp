#pragma once

#include <string>
#include <utility>
#include <vector>

#include "urbanfn/polygon.hpp"
#include "urbanfn/raster.hpp"

namespace urbanfn {

struct RasterizeResult {
  RasterGrid raster;
  // One entry per rejected polygon: "polygon <index>: <reason>".
  std::vector<std::string> diagnostics;
};

// Burns polygons into a single-band raster. A pixel takes a polygon's value
// when its center is inside under the even-odd rule (left/bottom edges
// inclusive). Later polygons overwrite earlier ones.
RasterizeResult rasterize_polygons(const std::vector<std::pair<Polygon, float>>& polys,
                                   const GridSpec& grid, float fill);

// Calls `visit(row, col)` for every pixel whose center lies inside `p`.
// `p` must be normalized (closed rings).
template <typename Visit>
void for_each_covered_pixel(const Polygon& p, const GridSpec& grid, Visit&& visit);

namespace detail {
void scanline_spans(const Polygon& p, const GridSpec& grid, int row,
                    std::vector<std::pair<int, int>>& spans, std::vector<double>& scratch);
std::pair<int, int> row_range(const Polygon& p, const GridSpec& grid);
}  // namespace detail

template <typename Visit>
void for_each_covered_pixel(const Polygon& p, const GridSpec& grid, Visit&& visit) {
  std::vector<std::pair<int, int>> spans;
  std::vector<double> scratch;
  auto [r0, r1] = detail::row_range(p, grid);
  for (int row = r0; row < r1; ++row) {
    detail::scanline_spans(p, grid, row, spans, scratch);
    for (auto [c0, c1] : spans)
      for (int col = c0; col < c1; ++col) visit(row, col);
  }
}

}  // namespace urbanfn
