#pragma once

#include "urbanfn/raster.hpp"

namespace urbanfn {

enum class ResampleMethod { Nearest, Bilinear };

ResampleMethod parse_resample_method(const std::string& name);

// Value written where a destination center falls outside the source and the
// source has no nodata value of its own.
inline constexpr float kDefaultNodata = -9999.0f;

// Samples `src` at every destination pixel center. Destination pixels that
// fall outside the source (or touch source nodata) receive nodata.
RasterGrid resample_to_grid(const RasterGrid& src, const GridSpec& dst, ResampleMethod method);

}  // namespace urbanfn
