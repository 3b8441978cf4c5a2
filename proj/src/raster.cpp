#include "urbanfn/raster.hpp"

#include <algorithm>

namespace urbanfn {

void validate(const AffineTransform& t) {
  if (!(t.pixel_size_x > 0.0)) throw DataError("affine transform: pixel_size_x must be > 0");
  if (t.pixel_size_y == 0.0 || !std::isfinite(t.pixel_size_y))
    throw DataError("affine transform: pixel_size_y must be non-zero");
  if (!std::isfinite(t.origin_x) || !std::isfinite(t.origin_y))
    throw DataError("affine transform: origin must be finite");
}

void validate(const GridSpec& g) {
  if (g.width < 1 || g.height < 1) throw DataError("grid must be at least 1x1 pixels");
  validate(g.transform);
}

double GridSpec::min_x() const { return transform.origin_x - 0.5 * transform.pixel_size_x; }
double GridSpec::max_x() const {
  return transform.origin_x + (width - 0.5) * transform.pixel_size_x;
}
double GridSpec::min_y() const {
  double a = transform.origin_y - 0.5 * transform.pixel_size_y;
  double b = transform.origin_y + (height - 0.5) * transform.pixel_size_y;
  return std::min(a, b);
}
double GridSpec::max_y() const {
  double a = transform.origin_y - 0.5 * transform.pixel_size_y;
  double b = transform.origin_y + (height - 0.5) * transform.pixel_size_y;
  return std::max(a, b);
}

}  // namespace urbanfn
