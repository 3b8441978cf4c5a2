#include "urbanfn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "urbanfn/bsqf.hpp"
#include "urbanfn/geojson.hpp"
#include "urbanfn/io.hpp"
#include "urbanfn/random.hpp"
#include "urbanfn/rasterize.hpp"
#include "urbanfn/resample.hpp"

namespace urbanfn {

using nlohmann::json;

std::array<ClassProfile, 7> CitySpec::default_profiles() {
  // Residential is tall and dim, commercial low and brightest at night.
  return {{
      {30.0, 6.0, 20.0, 5.0, {190, 120, 100}, {1.2, 1.0, 0.8}, 14},  // Residential
      {15.0, 4.0, 80.0, 10.0, {80, 120, 190}, {0.9, 1.0, 1.1}, 19},  // Commercial
      {12.0, 3.0, 45.0, 8.0, {200, 200, 110}, {1.0, 1.1, 0.9}, 16},  // PublicService
      {22.0, 4.0, 55.0, 8.0, {235, 235, 235}, {0.8, 1.0, 1.2}, 22},  // PublicHealth
      {8.0, 2.0, 65.0, 8.0, {110, 190, 110}, {1.1, 0.8, 1.1}, 29},   // SportArt
      {18.0, 4.0, 30.0, 6.0, {210, 150, 60}, {1.0, 1.0, 1.0}, 19},   // Educational
      {9.0, 2.0, 40.0, 6.0, {150, 150, 165}, {1.3, 0.9, 0.8}, 29},   // Industrial
  }};
}

void CitySpec::validate() const {
  if (tile_size < 16 || tiles_x < 1 || tiles_y < 1)
    throw DataError("city spec: tile_size >= 16 and at least one tile required");
  if (block_size < 8 || tile_size % block_size)
    throw DataError("city spec: block_size must divide tile_size");
  if (road_width < 0 || road_width % 2 || road_width >= block_size / 2)
    throw DataError("city spec: road_width must be even and small relative to the block");
  if (!(coarse_resolution >= 1.0)) throw DataError("city spec: coarse_resolution must be >= 1");
  double sum = 0.0;
  for (double p : proportions) {
    if (p < 0) throw DataError("city spec: negative class proportion");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("city spec: class proportions sum to " + std::to_string(sum) + ", expected 1");
  if (aoi_coverage < 0 || aoi_coverage > 1) throw DataError("city spec: aoi_coverage outside [0,1]");
  if (lot_occupancy <= 0 || lot_occupancy > 1) throw DataError("city spec: lot_occupancy outside (0,1]");
  for (const auto& p : profiles)
    if (p.cell < 8 || p.height_std < 0 || p.ntl_std < 0)
      throw DataError("city spec: class profile needs cell >= 8 and non-negative spreads");
}

namespace {

json profile_json(const ClassProfile& p) {
  return {{"height_mean", p.height_mean}, {"height_std", p.height_std}, {"ntl_mean", p.ntl_mean},
          {"ntl_std", p.ntl_std},         {"roof_rgb", p.roof_rgb},     {"ntl_ratio", p.ntl_ratio},
          {"cell", p.cell}};
}

ClassProfile profile_from(const json& j, ClassProfile p) {
  p.height_mean = j.value("height_mean", p.height_mean);
  p.height_std = j.value("height_std", p.height_std);
  p.ntl_mean = j.value("ntl_mean", p.ntl_mean);
  p.ntl_std = j.value("ntl_std", p.ntl_std);
  p.roof_rgb = j.value("roof_rgb", p.roof_rgb);
  p.ntl_ratio = j.value("ntl_ratio", p.ntl_ratio);
  p.cell = j.value("cell", p.cell);
  return p;
}

}  // namespace

CitySpec CitySpec::from_json(const json& j) {
  CitySpec s;
  try {
    s.tile_size = j.value("tile_size", s.tile_size);
    s.tiles_x = j.value("tiles_x", s.tiles_x);
    s.tiles_y = j.value("tiles_y", s.tiles_y);
    s.block_size = j.value("block_size", s.block_size);
    s.road_width = j.value("road_width", s.road_width);
    s.coarse_resolution = j.value("coarse_resolution", s.coarse_resolution);
    if (j.contains("proportions")) {
      const auto& p = j["proportions"];
      for (int c = 1; c <= 7; ++c) {
        auto name = std::string(class_name(FunctionClass(c)));
        if (p.contains(name)) s.proportions[c - 1] = p[name].get<double>();
      }
    }
    s.aoi_coverage = j.value("aoi_coverage", s.aoi_coverage);
    s.lot_occupancy = j.value("lot_occupancy", s.lot_occupancy);
    if (j.contains("profiles")) {
      for (int c = 1; c <= 7; ++c) {
        auto name = std::string(class_name(FunctionClass(c)));
        if (j["profiles"].contains(name))
          s.profiles[c - 1] = profile_from(j["profiles"][name], s.profiles[c - 1]);
      }
    }
    s.ground_rgb = j.value("ground_rgb", s.ground_rgb);
    s.road_rgb = j.value("road_rgb", s.road_rgb);
    s.oi_noise = j.value("oi_noise", s.oi_noise);
    s.roof_jitter = j.value("roof_jitter", s.roof_jitter);
    s.bh_noise = j.value("bh_noise", s.bh_noise);
    s.ntl_noise = j.value("ntl_noise", s.ntl_noise);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw DataError(std::string("city spec: ") + e.what());
  }
  s.validate();
  return s;
}

json CitySpec::to_json() const {
  json props = json::object(), profs = json::object();
  for (int c = 1; c <= 7; ++c) {
    auto name = std::string(class_name(FunctionClass(c)));
    props[name] = proportions[c - 1];
    profs[name] = profile_json(profiles[c - 1]);
  }
  return {{"tile_size", tile_size},   {"tiles_x", tiles_x},
          {"tiles_y", tiles_y},       {"block_size", block_size},
          {"road_width", road_width}, {"coarse_resolution", coarse_resolution},
          {"proportions", props},     {"aoi_coverage", aoi_coverage},
          {"lot_occupancy", lot_occupancy}, {"profiles", profs},
          {"ground_rgb", ground_rgb}, {"road_rgb", road_rgb},
          {"oi_noise", oi_noise},     {"roof_jitter", roof_jitter},
          {"bh_noise", bh_noise},     {"ntl_noise", ntl_noise},
          {"seed", seed}};
}

GridSpec tile_grid(const CitySpec& spec, int tx, int ty) {
  const double x0 = double(tx) * spec.tile_size, y0 = -double(ty) * spec.tile_size;
  return {spec.tile_size, spec.tile_size, {x0 + 0.5, y0 - 0.5, 1.0, -1.0}};
}

GridSpec coarse_grid(const CitySpec& spec, int tx, int ty) {
  const double r = spec.coarse_resolution;
  const double x0 = double(tx) * spec.tile_size, y0 = -double(ty) * spec.tile_size;
  const int n = int(std::ceil(spec.tile_size / r));
  return {n, n, {x0 + 0.5 * r, y0 - 0.5 * r, r, -r}};
}

std::string tile_dir_name(int tile_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tile_%03d", tile_id);
  return buf;
}

namespace {

struct Building {
  int x0, y0, w, h;  // tile pixel coordinates
  int code;
  double height;
  bool labeled;
  std::array<double, 3> roof;
};

struct Block {
  int tile, bx, by;
  int code = 0;
  double ntl = 0.0;
  std::vector<Building> buildings;
};

int block_building_area(const Block& b) {
  int a = 0;
  for (const auto& bd : b.buildings) a += bd.w * bd.h;
  return a;
}

void place_buildings(const CitySpec& spec, Block& block, Rng& rng) {
  const ClassProfile& prof = spec.profiles[block.code - 1];
  const int half_road = spec.road_width / 2;
  const int inner = spec.block_size - spec.road_width;
  const int n = std::max(1, inner / prof.cell);
  std::vector<int> edges(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) edges[i] = half_road + int(std::lround(double(i) * inner / n));
  for (int cy = 0; cy < n; ++cy)
    for (int cx = 0; cx < n; ++cx) {
      if (uniform01(rng) >= spec.lot_occupancy) continue;
      // 2-pixel margin per lot keeps neighbours at least 4 pixels apart.
      const int lx0 = edges[cx] + 2, lx1 = edges[cx + 1] - 2;
      const int ly0 = edges[cy] + 2, ly1 = edges[cy + 1] - 2;
      const int sw = lx1 - lx0, sh = ly1 - ly0;
      if (sw < 3 || sh < 3) continue;
      const int w = std::max(3, int(std::lround(sw * (0.55 + 0.45 * uniform01(rng)))));
      const int h = std::max(3, int(std::lround(sh * (0.55 + 0.45 * uniform01(rng)))));
      const int x = lx0 + int(uniform_index(rng, std::uint64_t(sw - w + 1)));
      const int y = ly0 + int(uniform_index(rng, std::uint64_t(sh - h + 1)));
      Building b;
      b.x0 = block.bx * spec.block_size + x;
      b.y0 = block.by * spec.block_size + y;
      b.w = w;
      b.h = h;
      b.code = block.code;
      b.height = std::max(3.0, normal(rng, prof.height_mean, prof.height_std));
      b.labeled = uniform01(rng) < spec.aoi_coverage;
      for (int k = 0; k < 3; ++k) b.roof[k] = prof.roof_rgb[k] + normal(rng, 0.0, spec.roof_jitter);
      block.buildings.push_back(b);
    }
}

Polygon world_rect(const GridSpec& g, int x0, int y0, int w, int h, double margin = 0.0) {
  const double left = g.min_x() + x0 - margin, right = g.min_x() + x0 + w + margin;
  const double top = g.max_y() - y0 + margin, bottom = g.max_y() - (y0 + h) - margin;
  return make_rectangle(left, bottom, right, top);
}

void render_tile(const CitySpec& spec, SynthTile& tile, const std::vector<const Block*>& blocks,
                 const ClassMap& class_map) {
  const GridSpec grid = tile_grid(spec, tile.tx, tile.ty);
  const GridSpec coarse = coarse_grid(spec, tile.tx, tile.ty);
  Rng rng(derive_seed(spec.seed, 0x7113, std::uint64_t(tile.tile_id)));

  std::vector<const Building*> bl;
  for (const Block* b : blocks)
    for (const auto& bd : b->buildings) bl.push_back(&bd);

  std::vector<AssignedBuilding> truth_assigned;
  std::vector<std::pair<Polygon, FunctionClass>> aoi_classes;
  std::vector<std::pair<Polygon, float>> id_polys;
  for (std::size_t i = 0; i < bl.size(); ++i) {
    const Building& b = *bl[i];
    Polygon fp = world_rect(grid, b.x0, b.y0, b.w, b.h);
    fp.attributes = {{"building_id", std::to_string(i)},
                     {"height", std::to_string(b.height)},
                     {"truth_class", std::to_string(b.code)}};
    tile.buildings.push_back(fp);
    tile.truth_codes.push_back(b.code);
    truth_assigned.push_back({fp, b.code});
    id_polys.emplace_back(fp, float(i + 1));
    if (b.labeled) {
      Polygon aoi = world_rect(grid, b.x0, b.y0, b.w, b.h, 1.0);
      auto tags = class_map.tags_for(FunctionClass(b.code));
      aoi.attributes[kAoiTagKey] = tags[uniform_index(rng, tags.size())];
      tile.aois.push_back(aoi);
      aoi_classes.emplace_back(aoi, *class_map.lookup(aoi.attributes[kAoiTagKey]));
    }
  }
  tile.truth = build_label_raster(truth_assigned, grid).raster;
  auto assigned = assign_building_functions(tile.buildings, aoi_classes);
  tile.weak = build_label_raster(assigned.buildings, grid).raster;
  const RasterGrid ids = rasterize_polygons(id_polys, grid, 0.0f).raster;

  // Optical image.
  tile.oi = RasterGrid(grid, 3, 0.0f);
  tile.oi.band_names = {"red", "green", "blue"};
  const int half_road = spec.road_width / 2;
  for (int row = 0; row < grid.height; ++row)
    for (int col = 0; col < grid.width; ++col) {
      const int id = int(ids(row, col));
      const int lx = col % spec.block_size, ly = row % spec.block_size;
      const bool road = lx < half_road || ly < half_road || lx >= spec.block_size - half_road ||
                        ly >= spec.block_size - half_road;
      const std::array<double, 3>& base =
          id > 0 ? bl[std::size_t(id - 1)]->roof : (road ? spec.road_rgb : spec.ground_rgb);
      for (int k = 0; k < 3; ++k)
        tile.oi.at(k, row, col) = float(std::clamp(base[k] + normal(rng, 0.0, spec.oi_noise), 0.0, 255.0));
    }

  // Building height: mean height of building pixels per coarse cell.
  const double r = spec.coarse_resolution;
  std::vector<double> hsum(coarse.pixels(), 0.0);
  std::vector<int> hcnt(coarse.pixels(), 0);
  for (int row = 0; row < grid.height; ++row)
    for (int col = 0; col < grid.width; ++col) {
      const int id = int(ids(row, col));
      if (id == 0) continue;
      const std::size_t cell = std::size_t(int(row / r)) * coarse.width + std::size_t(int(col / r));
      hsum[cell] += bl[std::size_t(id - 1)]->height;
      ++hcnt[cell];
    }
  tile.bh = RasterGrid(coarse, 1, 0.0f);
  tile.bh.band_names = {"height_m"};
  for (std::size_t i = 0; i < coarse.pixels(); ++i)
    if (hcnt[i] > 0)
      tile.bh.data()[i] = float(std::max(0.0, hsum[i] / hcnt[i] + normal(rng, 0.0, spec.bh_noise)));

  // Nighttime light: block radiance field, 3x3 smoothed, plus noise.
  const int nb = spec.tile_size / spec.block_size;
  std::vector<const Block*> block_at(static_cast<std::size_t>(nb * nb), nullptr);
  for (const Block* b : blocks) block_at[std::size_t(b->by) * nb + b->bx] = b;
  std::array<std::vector<double>, 3> field;
  for (auto& f : field) f.assign(coarse.pixels(), 0.0);
  for (int cy = 0; cy < coarse.height; ++cy)
    for (int cx = 0; cx < coarse.width; ++cx) {
      const int px = std::min(spec.tile_size - 1, int((cx + 0.5) * r));
      const int py = std::min(spec.tile_size - 1, int((cy + 0.5) * r));
      const Block* b = block_at[std::size_t(py / spec.block_size) * nb + px / spec.block_size];
      const ClassProfile& prof = spec.profiles[b->code - 1];
      for (int k = 0; k < 3; ++k)
        field[k][std::size_t(cy) * coarse.width + cx] = b->ntl * prof.ntl_ratio[k];
    }
  tile.ntl = RasterGrid(coarse, 3, 0.0f);
  tile.ntl.band_names = {"ntl_1", "ntl_2", "ntl_3"};
  for (int k = 0; k < 3; ++k)
    for (int cy = 0; cy < coarse.height; ++cy)
      for (int cx = 0; cx < coarse.width; ++cx) {
        double s = 0.0;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = cy + dy, xx = cx + dx;
            if (yy < 0 || xx < 0 || yy >= coarse.height || xx >= coarse.width) continue;
            s += field[k][std::size_t(yy) * coarse.width + xx];
            ++n;
          }
        tile.ntl.at(k, cy, cx) = float(std::max(0.0, s / n + normal(rng, 0.0, spec.ntl_noise)));
      }
}

}  // namespace

std::vector<SynthTile> generate_city(const CitySpec& spec) {
  spec.validate();
  const int nb = spec.tile_size / spec.block_size;
  const int tiles = spec.tiles_x * spec.tiles_y;
  std::vector<Block> blocks;
  for (int t = 0; t < tiles; ++t)
    for (int by = 0; by < nb; ++by)
      for (int bx = 0; bx < nb; ++bx) blocks.push_back({t, bx, by, 0, 0.0, {}});

  // Global layout: visit blocks in random order and give each the class with
  // the largest area deficit against its target share.
  Rng rng(spec.seed);
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::array<double, 7> class_area{};
  double assigned = 0.0;
  double typical = 0.35 * spec.block_size * spec.block_size;
  for (std::size_t visited = 0; visited < order.size(); ++visited) {
    Block& b = blocks[order[visited]];
    int best = 0;
    double best_deficit = -1e300;
    for (int c = 0; c < 7; ++c) {
      if (spec.proportions[c] <= 0) continue;
      const double deficit = spec.proportions[c] * (assigned + typical) - class_area[c];
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = c;
      }
    }
    b.code = best + 1;
    const ClassProfile& prof = spec.profiles[best];
    b.ntl = std::max(0.0, normal(rng, prof.ntl_mean, prof.ntl_std));
    place_buildings(spec, b, rng);
    const double a = block_building_area(b);
    class_area[best] += a;
    assigned += a;
    typical = assigned / double(visited + 1);
  }

  const ClassMap class_map = ClassMap::defaults();
  std::vector<SynthTile> out(static_cast<std::size_t>(tiles));
  for (int t = 0; t < tiles; ++t) {
    SynthTile& tile = out[std::size_t(t)];
    tile.tile_id = t;
    tile.tx = t % spec.tiles_x;
    tile.ty = t / spec.tiles_x;
    std::vector<const Block*> mine;
    for (const auto& b : blocks)
      if (b.tile == t) mine.push_back(&b);
    render_tile(spec, tile, mine, class_map);
  }
  return out;
}

TruthReport truth_report(const std::vector<SynthTile>& tiles) {
  TruthReport r;
  std::array<std::int64_t, 7> counts{};
  for (const auto& t : tiles) {
    for (float v : t.truth.labels.data()) {
      const int c = int(v);
      if (is_function(c)) {
        ++counts[c - 1];
        ++r.building_pixels;
      }
    }
    r.building_count += std::int64_t(t.buildings.size());
    for (const auto& b : t.buildings) r.building_area_m2 += area(b);
  }
  for (int k = 0; k < 7; ++k)
    r.proportions[k] = r.building_pixels ? double(counts[k]) / double(r.building_pixels) : 0.0;
  return r;
}

json to_json(const TruthReport& r) {
  json props = json::object();
  for (int c = 1; c <= 7; ++c) props[std::string(class_name(FunctionClass(c)))] = r.proportions[c - 1];
  return {{"proportions", props},
          {"building_count", r.building_count},
          {"building_area", r.building_area_m2},
          {"building_pixels", r.building_pixels}};
}

double nearest_profile_accuracy(const std::vector<SynthTile>& tiles, const CitySpec& spec) {
  std::int64_t hit = 0, total = 0;
  for (const auto& t : tiles) {
    const GridSpec& g = t.truth.labels.grid();
    const RasterGrid bh = resample_to_grid(t.bh, g, ResampleMethod::Nearest);
    const RasterGrid ntl = resample_to_grid(t.ntl, g, ResampleMethod::Nearest);
    for (std::size_t i = 0; i < g.pixels(); ++i) {
      const int truth = int(t.truth.labels.data()[i]);
      if (!is_function(truth)) continue;
      const double h = bh.data()[i];
      const double n = (ntl.band(0)[i] + ntl.band(1)[i] + ntl.band(2)[i]) / 3.0;
      int best = 0;
      double best_d = 1e300;
      for (int c = 0; c < 7; ++c) {
        const auto& p = spec.profiles[c];
        const double zh = (h - p.height_mean) / std::max(p.height_std, 1e-6);
        const double zn = (n - p.ntl_mean) / std::max(p.ntl_std, 1e-6);
        const double d = zh * zh + zn * zn;
        if (d < best_d) {
          best_d = d;
          best = c + 1;
        }
      }
      hit += best == truth;
      ++total;
    }
  }
  return total ? double(hit) / double(total) : 0.0;
}

void write_city(const std::filesystem::path& dir, const CitySpec& spec,
                const std::vector<SynthTile>& tiles, int holdout_tiles) {
  json entries = json::array();
  const int n = int(tiles.size());
  for (const auto& t : tiles) {
    const auto td = dir / tile_dir_name(t.tile_id);
    write_bsqf(td / "oi", t.oi);
    write_bsqf(td / "bh", t.bh);
    write_bsqf(td / "ntl", t.ntl);
    write_bsqf(td / "truth_labels", t.truth.labels);
    write_bsqf(td / "truth_supervision", t.truth.supervision);
    write_geojson(td / "buildings.geojson", t.buildings);
    write_geojson(td / "aois.geojson", t.aois);
    const bool test = t.tile_id >= n - holdout_tiles;
    entries.push_back({{"id", t.tile_id},
                       {"dir", tile_dir_name(t.tile_id)},
                       {"tx", t.tx},
                       {"ty", t.ty},
                       {"split", test ? "test" : "train"}});
  }
  json manifest = {{"spec", spec.to_json()}, {"tiles", entries}};
  write_file_atomic(dir / "city.json", manifest.dump(2) + "\n");
}

}  // namespace urbanfn
