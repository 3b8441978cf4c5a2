#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace urbanfn {

struct Point {
  double x;
  double y;
  bool operator==(const Point&) const = default;
};

// Closed ring: front() == back() once normalized.
using Ring = std::vector<Point>;

struct Polygon {
  Ring exterior;
  std::vector<Ring> holes;
  std::map<std::string, std::string> attributes;
};

// Appends the first vertex when the ring is open.
Ring close_ring(Ring r);
Polygon normalized(Polygon p);

// Axis-aligned rectangle [x0, x1] x [y0, y1] as a closed counter-clockwise ring.
Polygon make_rectangle(double x0, double y0, double x1, double y1);

// Returns a description of the defect, or nothing when the polygon is usable.
// A ring needs at least three distinct vertices.
std::optional<std::string> polygon_defect(const Polygon& p);

// Shoelace area; positive for counter-clockwise rings. Works on open or closed rings.
double signed_area(const Ring& r);
// Exterior area minus hole areas.
double area(const Polygon& p);

bool is_convex(const Ring& r);

struct BoundingBox {
  double min_x, min_y, max_x, max_y;
  bool intersects(const BoundingBox& o) const {
    return min_x < o.max_x && o.min_x < max_x && min_y < o.max_y && o.min_y < max_y;
  }
};
BoundingBox bounds(const Ring& r);

// Even-odd membership with the half-open edge rule used by the rasterizer:
// points on a left or bottom edge are inside, on a right or top edge outside.
bool contains(const Polygon& p, Point q);

// Clips `subject` against a convex `clip` ring (Sutherland-Hodgman). The
// subject may be concave; degenerate connecting edges carry zero area.
Ring clip_to_convex(const Ring& subject, const Ring& clip);

// Area of a ∩ b. Exact clipping when either exterior is convex, otherwise
// counts pixel centers of a lattice with spacing `fallback_cell` that lie in both.
double overlap_area(const Polygon& a, const Polygon& b, double fallback_cell);

}  // namespace urbanfn
