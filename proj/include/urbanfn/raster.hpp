#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "urbanfn/error.hpp"

namespace urbanfn {

// North-up affine georeference. The origin is the world position of the
// center of pixel (0, 0).
struct AffineTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel_size_x = 1.0;
  double pixel_size_y = -1.0;

  bool operator==(const AffineTransform&) const = default;
};

struct PixelCoord {
  double col;
  double row;
};

struct WorldCoord {
  double x;
  double y;
};

inline PixelCoord world_to_pixel(const AffineTransform& t, double x, double y) {
  return {(x - t.origin_x) / t.pixel_size_x, (y - t.origin_y) / t.pixel_size_y};
}

inline WorldCoord pixel_to_world(const AffineTransform& t, double col, double row) {
  return {t.origin_x + col * t.pixel_size_x, t.origin_y + row * t.pixel_size_y};
}

void validate(const AffineTransform& t);

// Raster geometry without payload.
struct GridSpec {
  int width = 1;
  int height = 1;
  AffineTransform transform;

  std::size_t pixels() const { return std::size_t(width) * std::size_t(height); }

  // World-space bounding box of the pixel footprints (not the centers).
  double min_x() const;
  double max_x() const;
  double min_y() const;
  double max_y() const;

  bool operator==(const GridSpec&) const = default;
};

void validate(const GridSpec& g);

// Band-sequential raster, row-major within each band.
template <typename Scalar>
class Raster {
 public:
  using value_type = Scalar;

  Raster() = default;
  explicit Raster(const GridSpec& grid, int bands = 1, Scalar fill = Scalar(0))
      : grid_(grid), bands_(bands), data_(grid.pixels() * std::size_t(bands), fill) {
    validate(grid_);
    if (bands < 1) throw DataError("raster needs at least one band");
  }
  Raster(const GridSpec& grid, int bands, std::vector<Scalar> data)
      : grid_(grid), bands_(bands), data_(std::move(data)) {
    validate(grid_);
    if (bands < 1) throw DataError("raster needs at least one band");
    if (data_.size() != grid_.pixels() * std::size_t(bands))
      throw DataError("raster payload length does not match width*height*bands");
  }

  int width() const { return grid_.width; }
  int height() const { return grid_.height; }
  int bands() const { return bands_; }
  std::size_t pixels() const { return grid_.pixels(); }
  const GridSpec& grid() const { return grid_; }
  const AffineTransform& transform() const { return grid_.transform; }

  Scalar& at(int band, int row, int col) { return data_[index(band, row, col)]; }
  Scalar at(int band, int row, int col) const { return data_[index(band, row, col)]; }
  Scalar& operator()(int row, int col) { return data_[index(0, row, col)]; }
  Scalar operator()(int row, int col) const { return data_[index(0, row, col)]; }

  std::span<Scalar> band(int b) { return {data_.data() + std::size_t(b) * pixels(), pixels()}; }
  std::span<const Scalar> band(int b) const {
    return {data_.data() + std::size_t(b) * pixels(), pixels()};
  }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  bool is_nodata(Scalar v) const {
    if (!nodata) return false;
    if constexpr (std::is_floating_point_v<Scalar>) {
      if (std::isnan(*nodata)) return std::isnan(v);
    }
    return v == *nodata;
  }

  std::optional<Scalar> nodata;
  std::vector<std::string> band_names;

 private:
  std::size_t index(int band, int row, int col) const {
    assert(band >= 0 && band < bands_ && row >= 0 && row < grid_.height && col >= 0 &&
           col < grid_.width);
    return (std::size_t(band) * std::size_t(grid_.height) + std::size_t(row)) *
               std::size_t(grid_.width) +
           std::size_t(col);
  }

  GridSpec grid_;
  int bands_ = 1;
  std::vector<Scalar> data_ = std::vector<Scalar>(1, Scalar(0));
};

using RasterGrid = Raster<float>;

// Copies band `b` of `src` into a new single-band raster.
template <typename Scalar>
Raster<Scalar> extract_band(const Raster<Scalar>& src, int b) {
  auto view = src.band(b);
  Raster<Scalar> out(src.grid(), 1, std::vector<Scalar>(view.begin(), view.end()));
  out.nodata = src.nodata;
  if (std::size_t(b) < src.band_names.size()) out.band_names = {src.band_names[b]};
  return out;
}

// Stacks single- or multi-band rasters sharing one grid.
template <typename Scalar>
Raster<Scalar> stack_bands(std::span<const Raster<Scalar>> parts) {
  if (parts.empty()) throw DataError("stack_bands: no inputs");
  int bands = 0;
  for (const auto& p : parts) {
    if (!(p.grid() == parts.front().grid())) throw DataError("stack_bands: grid mismatch");
    bands += p.bands();
  }
  std::vector<Scalar> data;
  data.reserve(parts.front().pixels() * std::size_t(bands));
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Raster<Scalar>(parts.front().grid(), bands, std::move(data));
}

}  // namespace urbanfn
