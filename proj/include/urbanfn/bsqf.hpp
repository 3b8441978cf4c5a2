#pragma once

#include <filesystem>

#include "urbanfn/raster.hpp"

namespace urbanfn {

// BSQF container: `<base>.json` header plus `<base>.bin` little-endian float32
// payload, band-sequential, row-major within band.
//
// `base` may carry a `.json`, `.bin` or `.bsqf` suffix; it is stripped.
std::filesystem::path bsqf_base(const std::filesystem::path& path);

void write_bsqf(const std::filesystem::path& base, const RasterGrid& raster);
RasterGrid read_bsqf(const std::filesystem::path& base);

}  // namespace urbanfn
