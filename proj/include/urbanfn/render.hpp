#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "urbanfn/raster.hpp"

namespace urbanfn {

using Rgb = std::array<std::uint8_t, 3>;

// Colors for class codes 0..7 plus the unlabeled sentinel.
struct Palette {
  std::array<Rgb, 8> classes;
  Rgb unlabeled;

  static Palette defaults();
  const Rgb& color(int code) const;
};

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

// One pixel per cell. Cells outside {0..7, 255} raise DataError naming the value.
// The legend strip appends a row of swatches below the map.
Image render_map(const RasterGrid& map, const Palette& palette, bool legend = false);

std::string encode_png(const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace urbanfn
