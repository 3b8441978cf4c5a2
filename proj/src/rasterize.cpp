#include "urbanfn/rasterize.hpp"

#include <algorithm>
#include <cmath>

namespace urbanfn {
namespace detail {

std::pair<int, int> row_range(const Polygon& p, const GridSpec& grid) {
  BoundingBox b = bounds(p.exterior);
  for (const auto& h : p.holes) {
    BoundingBox hb = bounds(h);
    b = {std::min(b.min_x, hb.min_x), std::min(b.min_y, hb.min_y), std::max(b.max_x, hb.max_x),
         std::max(b.max_y, hb.max_y)};
  }
  const auto& t = grid.transform;
  double ra = (b.min_y - t.origin_y) / t.pixel_size_y;
  double rb = (b.max_y - t.origin_y) / t.pixel_size_y;
  int r0 = std::max(0, int(std::floor(std::min(ra, rb))) - 1);
  int r1 = std::min(grid.height, int(std::ceil(std::max(ra, rb))) + 2);
  return {r0, std::max(r0, r1)};
}

namespace {

void add_crossings(const Ring& r, double y, std::vector<double>& xs) {
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const Point& a = r[i];
    const Point& b = r[i + 1];
    if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
  }
}

// First column whose center x is >= x.
int first_col_at_or_after(const AffineTransform& t, double x) {
  double c = std::ceil((x - t.origin_x) / t.pixel_size_x);
  if (c < -1.0) return 0;
  if (c > 2e9) return 2000000000;
  int col = int(c);
  while (t.origin_x + col * t.pixel_size_x < x) ++col;
  while (t.origin_x + (col - 1) * t.pixel_size_x >= x) --col;
  return col;
}

}  // namespace

void scanline_spans(const Polygon& p, const GridSpec& grid, int row,
                    std::vector<std::pair<int, int>>& spans, std::vector<double>& xs) {
  spans.clear();
  xs.clear();
  const auto& t = grid.transform;
  double y = t.origin_y + row * t.pixel_size_y;
  add_crossings(p.exterior, y, xs);
  for (const auto& h : p.holes) add_crossings(h, y, xs);
  std::sort(xs.begin(), xs.end());
  for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
    int c0 = std::clamp(first_col_at_or_after(t, xs[i]), 0, grid.width);
    int c1 = std::clamp(first_col_at_or_after(t, xs[i + 1]), 0, grid.width);
    if (c1 > c0) spans.emplace_back(c0, c1);
  }
}

}  // namespace detail

RasterizeResult rasterize_polygons(const std::vector<std::pair<Polygon, float>>& polys,
                                   const GridSpec& grid, float fill) {
  RasterizeResult result{RasterGrid(grid, 1, fill), {}};
  for (std::size_t i = 0; i < polys.size(); ++i) {
    if (auto defect = polygon_defect(polys[i].first)) {
      result.diagnostics.push_back("polygon " + std::to_string(i) + ": " + *defect);
      continue;
    }
    Polygon p = normalized(polys[i].first);
    float value = polys[i].second;
    for_each_covered_pixel(p, grid, [&](int row, int col) { result.raster(row, col) = value; });
  }
  return result;
}

}  // namespace urbanfn
