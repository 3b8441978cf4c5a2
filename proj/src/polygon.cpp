#include "urbanfn/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace urbanfn {

Ring close_ring(Ring r) {
  if (!r.empty() && !(r.front() == r.back())) r.push_back(r.front());
  return r;
}

Polygon normalized(Polygon p) {
  p.exterior = close_ring(std::move(p.exterior));
  for (auto& h : p.holes) h = close_ring(std::move(h));
  return p;
}

Polygon make_rectangle(double x0, double y0, double x1, double y1) {
  Polygon p;
  p.exterior = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
  return p;
}

namespace {

std::size_t distinct_vertices(const Ring& r) {
  std::set<std::pair<double, double>> seen;
  for (const auto& v : r) seen.emplace(v.x, v.y);
  return seen.size();
}

bool finite(const Ring& r) {
  return std::all_of(r.begin(), r.end(),
                     [](const Point& v) { return std::isfinite(v.x) && std::isfinite(v.y); });
}

}  // namespace

std::optional<std::string> polygon_defect(const Polygon& p) {
  if (!finite(p.exterior)) return "exterior ring has non-finite coordinates";
  if (distinct_vertices(p.exterior) < 3) return "exterior ring has fewer than 3 distinct vertices";
  for (std::size_t i = 0; i < p.holes.size(); ++i) {
    if (!finite(p.holes[i])) return "hole " + std::to_string(i) + " has non-finite coordinates";
    if (distinct_vertices(p.holes[i]) < 3)
      return "hole " + std::to_string(i) + " has fewer than 3 distinct vertices";
  }
  return std::nullopt;
}

double signed_area(const Ring& r) {
  if (r.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Point& a = r[i];
    const Point& b = r[(i + 1) % r.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

double area(const Polygon& p) {
  double a = std::abs(signed_area(p.exterior));
  for (const auto& h : p.holes) a -= std::abs(signed_area(h));
  return a;
}

bool is_convex(const Ring& ring) {
  Ring r = ring;
  if (r.size() > 1 && r.front() == r.back()) r.pop_back();
  // drop repeated vertices
  r.erase(std::unique(r.begin(), r.end()), r.end());
  if (r.size() < 3) return false;
  int sign = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Point& a = r[i];
    const Point& b = r[(i + 1) % r.size()];
    const Point& c = r[(i + 2) % r.size()];
    double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (cross == 0.0) continue;
    int s = cross > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return sign != 0;
}

BoundingBox bounds(const Ring& r) {
  BoundingBox b{r.front().x, r.front().y, r.front().x, r.front().y};
  for (const auto& v : r) {
    b.min_x = std::min(b.min_x, v.x);
    b.max_x = std::max(b.max_x, v.x);
    b.min_y = std::min(b.min_y, v.y);
    b.max_y = std::max(b.max_y, v.y);
  }
  return b;
}

namespace {

// Number of ring edges crossing the horizontal line through q strictly to the
// left of or at q.x. Mirrors the rasterizer's scanline rule.
int crossings_left(const Ring& r, Point q) {
  int n = 0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const Point& a = r[i];
    const Point& b = r[i + 1];
    if ((a.y > q.y) != (b.y > q.y)) {
      double x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x <= q.x) ++n;
    }
  }
  return n;
}

}  // namespace

bool contains(const Polygon& p, Point q) {
  Polygon c = normalized(p);
  int n = crossings_left(c.exterior, q);
  for (const auto& h : c.holes) n += crossings_left(h, q);
  return n % 2 == 1;
}

Ring clip_to_convex(const Ring& subject, const Ring& clip) {
  Ring c = clip;
  if (c.size() > 1 && c.front() == c.back()) c.pop_back();
  if (signed_area(c) < 0) std::reverse(c.begin(), c.end());
  Ring out = subject;
  if (out.size() > 1 && out.front() == out.back()) out.pop_back();

  for (std::size_t i = 0; i < c.size() && !out.empty(); ++i) {
    const Point a = c[i];
    const Point b = c[(i + 1) % c.size()];
    auto side = [&](const Point& p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); };
    auto intersect = [&](const Point& p, const Point& q) {
      double sp = side(p), sq = side(q);
      double t = sp / (sp - sq);
      return Point{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    };
    Ring in = std::move(out);
    out.clear();
    for (std::size_t j = 0; j < in.size(); ++j) {
      const Point& cur = in[j];
      const Point& prev = in[(j + in.size() - 1) % in.size()];
      bool cur_in = side(cur) >= 0;
      bool prev_in = side(prev) >= 0;
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur));
      }
    }
  }
  return out;
}

namespace {

double clipped_area(const Polygon& subject, const Ring& convex) {
  double a = std::abs(signed_area(clip_to_convex(subject.exterior, convex)));
  for (const auto& h : subject.holes) a -= std::abs(signed_area(clip_to_convex(h, convex)));
  return std::max(a, 0.0);
}

}  // namespace

double overlap_area(const Polygon& a, const Polygon& b, double fallback_cell) {
  if (!bounds(a.exterior).intersects(bounds(b.exterior))) return 0.0;
  if (is_convex(b.exterior) && b.holes.empty()) return clipped_area(a, b.exterior);
  if (is_convex(a.exterior) && a.holes.empty()) return clipped_area(b, a.exterior);

  BoundingBox ba = bounds(a.exterior), bb = bounds(b.exterior);
  double x0 = std::max(ba.min_x, bb.min_x), x1 = std::min(ba.max_x, bb.max_x);
  double y0 = std::max(ba.min_y, bb.min_y), y1 = std::min(ba.max_y, bb.max_y);
  Polygon na = normalized(a), nb = normalized(b);
  std::size_t hits = 0;
  for (double y = y0 + 0.5 * fallback_cell; y < y1; y += fallback_cell)
    for (double x = x0 + 0.5 * fallback_cell; x < x1; x += fallback_cell)
      if (contains(na, {x, y}) && contains(nb, {x, y})) ++hits;
  return double(hits) * fallback_cell * fallback_cell;
}

}  // namespace urbanfn
