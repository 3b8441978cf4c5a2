#include "urbanfn/cube.hpp"

#include <cmath>
#include <random>

#include "json.hpp"
#include "urbanfn/random.hpp"

namespace urbanfn {

namespace {

RasterGrid onto(const RasterGrid& src, const GridSpec& target, ResampleMethod method) {
  if (src.grid() == target) return src;
  return resample_to_grid(src, target, method);
}

}  // namespace

Cube assemble_cube(const RasterGrid& oi, const RasterGrid& bh, const RasterGrid& ntl,
                   const GridSpec& target, ResampleMethod method) {
  if (oi.bands() != 3) throw DataError("assemble_cube: optical image needs 3 bands");
  if (bh.bands() != 1) throw DataError("assemble_cube: building height needs 1 band");
  if (ntl.bands() != 3) throw DataError("assemble_cube: nighttime light needs 3 bands");

  std::array<RasterGrid, 3> parts = {onto(oi, target, method), onto(bh, target, method),
                                     onto(ntl, target, method)};
  Cube cube;
  cube.raster = stack_bands<float>(parts);
  cube.raster.band_names.assign(kCubeBandNames.begin(), kCubeBandNames.end());

  // Carry nodata only if some input introduced it.
  std::optional<float> nodata;
  for (const auto& p : parts)
    if (p.nodata) nodata = nodata.value_or(*p.nodata);
  if (nodata) {
    auto& data = cube.raster.data();
    std::size_t px = cube.raster.pixels();
    for (int b = 0; b < kCubeBands; ++b) {
      const RasterGrid& src = parts[b < 3 ? 0 : (b == 3 ? 1 : 2)];
      if (!src.nodata || *src.nodata == *nodata) continue;
      for (std::size_t i = 0; i < px; ++i)
        if (src.is_nodata(data[b * px + i])) data[b * px + i] = *nodata;
    }
    cube.raster.nodata = nodata;
  }
  return cube;
}

NormStats fit_normalizer(std::span<const Cube* const> cubes) {
  if (cubes.empty()) throw DataError("fit_normalizer: no training tiles");
  NormStats stats{};
  for (int b = 0; b < kCubeBands; ++b) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const Cube* c : cubes) {
      if (c->raster.bands() != kCubeBands) throw DataError("fit_normalizer: cube must have 7 bands");
      for (float v : c->raster.band(b)) {
        if (c->raster.is_nodata(v)) continue;
        sum += v;
        ++n;
      }
    }
    if (n == 0)
      throw DataError("fit_normalizer: band " + kCubeBandNames[b] + " has no valid pixels");
    double mean = sum / double(n);
    double ss = 0.0;
    for (const Cube* c : cubes)
      for (float v : c->raster.band(b)) {
        if (c->raster.is_nodata(v)) continue;
        ss += (v - mean) * (v - mean);
      }
    double sd = std::sqrt(ss / double(n));
    stats[b] = {mean, sd < 1e-6 ? 1.0 : sd};
  }
  return stats;
}

void normalize(Cube& cube, const NormStats& stats) {
  if (cube.normalized) throw DataError("normalize: cube already normalized");
  auto& r = cube.raster;
  for (int b = 0; b < kCubeBands; ++b) {
    for (float& v : r.band(b)) {
      if (r.is_nodata(v)) v = 0.0f;
      else v = float((double(v) - stats[b].mean) / stats[b].std);
    }
  }
  r.nodata.reset();
  cube.norm_stats = stats;
  cube.normalized = true;
}

void denormalize(Cube& cube) {
  if (!cube.normalized) throw DataError("denormalize: cube is not normalized");
  for (int b = 0; b < kCubeBands; ++b)
    for (float& v : cube.raster.band(b))
      v = float(double(v) * cube.norm_stats[b].std + cube.norm_stats[b].mean);
  cube.normalized = false;
}

std::string norm_stats_to_json(const NormStats& stats) {
  nlohmann::json bands = nlohmann::json::array();
  for (int b = 0; b < kCubeBands; ++b)
    bands.push_back({{"band", kCubeBandNames[b]}, {"mean", stats[b].mean}, {"std", stats[b].std}});
  return nlohmann::json{{"bands", bands}}.dump(2) + "\n";
}

NormStats norm_stats_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    const auto& bands = j.at("bands");
    if (bands.size() != kCubeBands) throw DataError("normalizer: expected 7 bands");
    NormStats s{};
    for (int b = 0; b < kCubeBands; ++b) {
      if (bands[b].at("band").get<std::string>() != kCubeBandNames[b])
        throw DataError("normalizer: band order mismatch at " + std::to_string(b));
      s[b] = {bands[b].at("mean").get<double>(), bands[b].at("std").get<double>()};
      if (!(s[b].std > 0.0)) throw DataError("normalizer: std must be positive");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("normalizer: ") + e.what());
  }
}

void CropBatch::append(const CropBatch& o) {
  if (count() > 0 && o.size != size) throw DataError("CropBatch::append: size mismatch");
  size = o.size;
  patches.insert(patches.end(), o.patches.begin(), o.patches.end());
  labels.insert(labels.end(), o.labels.begin(), o.labels.end());
  supervision.insert(supervision.end(), o.supervision.begin(), o.supervision.end());
  tile_ids.insert(tile_ids.end(), o.tile_ids.begin(), o.tile_ids.end());
  offsets.insert(offsets.end(), o.offsets.begin(), o.offsets.end());
}

void append_crop(CropBatch& batch, const Cube& cube, const LabelRaster& lr, int tile_id,
                 CropOffset at) {
  const int s = batch.size;
  const auto& r = cube.raster;
  if (at.row < 0 || at.col < 0 || at.row + s > r.height() || at.col + s > r.width())
    throw DataError("append_crop: window outside tile");
  for (int b = 0; b < kCubeBands; ++b)
    for (int y = 0; y < s; ++y) {
      auto row = r.band(b).subspan(std::size_t(at.row + y) * r.width() + at.col, s);
      batch.patches.insert(batch.patches.end(), row.begin(), row.end());
    }
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      batch.labels.push_back(std::uint8_t(lr.labels(at.row + y, at.col + x)));
      batch.supervision.push_back(std::uint8_t(lr.supervision(at.row + y, at.col + x)));
    }
  batch.tile_ids.push_back(tile_id);
  batch.offsets.push_back(at);
}

CropBatch sample_crops(const Cube& cube, const LabelRaster& lr, int n, int size,
                       std::uint64_t seed, int tile_id) {
  const auto& g = cube.raster.grid();
  if (cube.raster.bands() != kCubeBands) throw DataError("sample_crops: cube must have 7 bands");
  if (!(lr.labels.grid() == g) || !(lr.supervision.grid() == g))
    throw DataError("sample_crops: label raster not congruent with cube");
  if (size < 1 || size > g.width || size > g.height)
    throw DataError("sample_crops: crop size " + std::to_string(size) + " exceeds tile " +
                    std::to_string(g.width) + "x" + std::to_string(g.height));
  Rng rng(seed);
  CropBatch batch;
  batch.size = size;
  batch.patches.reserve(std::size_t(n) * kCubeBands * size * size);
  for (int i = 0; i < n; ++i) {
    int row = int(uniform_index(rng, std::uint64_t(g.height - size + 1)));
    int col = int(uniform_index(rng, std::uint64_t(g.width - size + 1)));
    append_crop(batch, cube, lr, tile_id, {row, col});
  }
  return batch;
}

}  // namespace urbanfn
