#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "urbanfn/labelgen.hpp"
#include "urbanfn/raster.hpp"
#include "urbanfn/resample.hpp"

namespace urbanfn {

inline constexpr int kCubeBands = 7;
inline const std::array<std::string, kCubeBands> kCubeBandNames = {
    "oi_r", "oi_g", "oi_b", "bh", "ntl_1", "ntl_2", "ntl_3"};

struct BandStats {
  double mean = 0.0;
  double std = 1.0;
};

using NormStats = std::array<BandStats, kCubeBands>;

// Seven-band input stack [OI-R, OI-G, OI-B, BH, NTL-1, NTL-2, NTL-3].
struct Cube {
  RasterGrid raster;
  NormStats norm_stats{};
  bool normalized = false;
};

// Resamples the height and nighttime-light rasters onto `target` and stacks
// all modalities in the fixed band order. Inputs already on `target` are
// copied verbatim.
Cube assemble_cube(const RasterGrid& oi, const RasterGrid& bh, const RasterGrid& ntl,
                   const GridSpec& target, ResampleMethod method = ResampleMethod::Nearest);

// Per-band mean and population standard deviation over every non-nodata
// pixel of every cube. A standard deviation below 1e-6 is replaced by 1.
NormStats fit_normalizer(std::span<const Cube* const> cubes);

// z-score in place. Nodata pixels become 0 (the band mean).
void normalize(Cube& cube, const NormStats& stats);
void denormalize(Cube& cube);

std::string norm_stats_to_json(const NormStats& stats);
NormStats norm_stats_from_json(const std::string& text);

struct CropOffset {
  int row;
  int col;
};

// N patches of size S: patches are [N, 7, S, S], labels and supervision [N, S, S].
struct CropBatch {
  int size = 0;
  std::vector<float> patches;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> supervision;
  std::vector<int> tile_ids;
  std::vector<CropOffset> offsets;

  int count() const { return int(offsets.size()); }
  void append(const CropBatch& other);
};

// Copies one aligned (cube, labels, supervision) window into `batch`.
void append_crop(CropBatch& batch, const Cube& cube, const LabelRaster& lr, int tile_id,
                 CropOffset at);

// Draws `n` top-left offsets uniformly (with replacement) and extracts the
// congruent patches. Deterministic for a given seed.
CropBatch sample_crops(const Cube& cube, const LabelRaster& lr, int n, int size,
                       std::uint64_t seed, int tile_id = 0);

}  // namespace urbanfn
