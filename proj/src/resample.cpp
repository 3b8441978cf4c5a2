#include "urbanfn/resample.hpp"

#include <algorithm>
#include <cmath>

namespace urbanfn {

ResampleMethod parse_resample_method(const std::string& name) {
  if (name == "nearest") return ResampleMethod::Nearest;
  if (name == "bilinear") return ResampleMethod::Bilinear;
  throw DataError("unknown resample method '" + name + "' (expected nearest|bilinear)");
}

RasterGrid resample_to_grid(const RasterGrid& src, const GridSpec& dst, ResampleMethod method) {
  validate(dst);
  const GridSpec& sg = src.grid();
  double ix0 = std::max(sg.min_x(), dst.min_x()), ix1 = std::min(sg.max_x(), dst.max_x());
  double iy0 = std::max(sg.min_y(), dst.min_y()), iy1 = std::min(sg.max_y(), dst.max_y());
  if (!(ix1 > ix0 && iy1 > iy0)) throw DataError("resample_to_grid: empty intersection");

  const float nodata = src.nodata.value_or(kDefaultNodata);
  RasterGrid out(dst, src.bands(), nodata);
  out.nodata = nodata;
  out.band_names = src.band_names;

  const int sw = src.width(), sh = src.height();
  for (int row = 0; row < dst.height; ++row) {
    for (int col = 0; col < dst.width; ++col) {
      WorldCoord w = pixel_to_world(dst.transform, col, row);
      PixelCoord s = world_to_pixel(sg.transform, w.x, w.y);
      if (method == ResampleMethod::Nearest) {
        double fc = std::floor(s.col + 0.5), fr = std::floor(s.row + 0.5);
        if (fc < 0 || fr < 0 || fc >= sw || fr >= sh) continue;
        int c = int(fc), r = int(fr);
        for (int b = 0; b < src.bands(); ++b) out.at(b, row, col) = src.at(b, r, c);
        continue;
      }
      if (s.col < -0.5 || s.row < -0.5 || s.col > sw - 0.5 || s.row > sh - 0.5) continue;
      double cc = std::clamp(s.col, 0.0, double(sw - 1));
      double rr = std::clamp(s.row, 0.0, double(sh - 1));
      int c0 = std::min(int(std::floor(cc)), sw - 1), r0 = std::min(int(std::floor(rr)), sh - 1);
      int c1 = std::min(c0 + 1, sw - 1), r1 = std::min(r0 + 1, sh - 1);
      double fx = cc - c0, fy = rr - r0;
      for (int b = 0; b < src.bands(); ++b) {
        float v00 = src.at(b, r0, c0), v01 = src.at(b, r0, c1);
        float v10 = src.at(b, r1, c0), v11 = src.at(b, r1, c1);
        if (src.is_nodata(v00) || src.is_nodata(v01) || src.is_nodata(v10) || src.is_nodata(v11))
          continue;
        double top = v00 + fx * (v01 - v00);
        double bottom = v10 + fx * (v11 - v10);
        double v = top + fy * (bottom - top);
        // keep within the neighbour range despite rounding
        double lo = std::min({v00, v01, v10, v11}), hi = std::max({v00, v01, v10, v11});
        out.at(b, row, col) = float(std::clamp(v, lo, hi));
      }
    }
  }
  return out;
}

}  // namespace urbanfn
