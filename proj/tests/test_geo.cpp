#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "urbanfn/bsqf.hpp"
#include "urbanfn/error.hpp"
#include "urbanfn/geojson.hpp"
#include "urbanfn/io.hpp"
#include "urbanfn/polygon.hpp"
#include "urbanfn/rasterize.hpp"
#include "urbanfn/resample.hpp"

using namespace urbanfn;
namespace fs = std::filesystem;

namespace {

// Unit grid whose pixel (0,0) covers [0,1] x [h-1,h].
GridSpec unit_grid(int w, int h) { return {w, h, {0.5, h - 0.5, 1.0, -1.0}}; }

Polygon lattice_polygon(std::mt19937_64& rng, double lo_x, double hi_x, double lo_y, double hi_y) {
  std::uniform_int_distribution<int> nv(3, 9);
  std::uniform_int_distribution<int> ix(int(lo_x * 4), int(hi_x * 4)), iy(int(lo_y * 4), int(hi_y * 4));
  Polygon p;
  const int n = nv(rng);
  for (int i = 0; i < n; ++i) p.exterior.push_back({ix(rng) / 4.0, iy(rng) / 4.0});
  return p;
}

}  // namespace

TEST_CASE("world_to_pixel examples") {
  auto p = world_to_pixel({0, 0, 1, -1}, 3.0, -4.0);
  CHECK(p.col == 3.0);
  CHECK(p.row == 4.0);
  p = world_to_pixel({100, 200, 10, -10}, 150, 150);
  CHECK(p.col == doctest::Approx(5.0));
  CHECK(p.row == doctest::Approx(5.0));
}

TEST_CASE("pixel_to_world round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e4, 1e4), s(0.1, 30);
  for (int i = 0; i < 100; ++i) {
    AffineTransform t{u(rng), u(rng), s(rng), -s(rng)};
    const double c = u(rng) / 10, r = u(rng) / 10;
    auto w = pixel_to_world(t, c, r);
    auto back = world_to_pixel(t, w.x, w.y);
    auto w2 = pixel_to_world(t, back.col, back.row);
    CHECK(std::abs(w2.x - w.x) < 1e-9);
    CHECK(std::abs(w2.y - w.y) < 1e-9);
  }
}

TEST_CASE("transform and grid validation") {
  CHECK_THROWS_AS(validate(AffineTransform{0, 0, 0, -1}), DataError);
  CHECK_THROWS_AS(validate(AffineTransform{0, 0, 1, 0}), DataError);
  CHECK_THROWS_AS(validate(GridSpec{0, 3, {0, 0, 1, -1}}), DataError);
  CHECK_THROWS_AS(RasterGrid(unit_grid(2, 2), 1, std::vector<float>(3)), DataError);
}

TEST_CASE("rasterize: empty list gives fill") {
  auto r = rasterize_polygons({}, unit_grid(10, 10), 0.0f);
  for (float v : r.raster.data()) CHECK(v == 0.0f);
  CHECK(r.diagnostics.empty());
}

TEST_CASE("rasterize: rectangle covering columns 2..5 and rows 3..7") {
  const GridSpec g = unit_grid(10, 10);
  // Rows 3..7 span y in [10-8, 10-3].
  auto r = rasterize_polygons({{make_rectangle(2, 2, 6, 7), 1.0f}}, g, 0.0f).raster;
  int count = 0;
  for (int row = 0; row < 10; ++row)
    for (int col = 0; col < 10; ++col) {
      const bool expect = col >= 2 && col <= 5 && row >= 3 && row <= 7;
      CHECK((r(row, col) == 1.0f) == expect);
      count += r(row, col) == 1.0f;
    }
  CHECK(count == 20);
}

TEST_CASE("rasterize: triangle equals per-center oracle") {
  const GridSpec g{8, 8, {0.5, 0.5, 1.0, 1.0}};  // y grows with row
  Polygon tri;
  tri.exterior = {{0, 0}, {4, 0}, {0, 4}};
  auto r = rasterize_polygons({{tri, 3.0f}}, g, 0.0f).raster;
  auto m = oracle::center_mask(tri, g);
  for (std::size_t i = 0; i < g.pixels(); ++i) CHECK((r.data()[i] == 3.0f) == m[i]);
}

TEST_CASE("rasterize: random lattice polygons with holes match PNPOLY everywhere") {
  std::mt19937_64 rng(11);
  const GridSpec g = unit_grid(24, 20);
  for (int k = 0; k < 100; ++k) {
    Polygon p = lattice_polygon(rng, -2, 26, -2, 22);
    if (k % 3 == 0) p.holes.push_back(lattice_polygon(rng, 2, 20, 2, 18).exterior);
    if (polygon_defect(p)) continue;
    auto r = rasterize_polygons({{p, 1.0f}}, g, 0.0f).raster;
    auto m = oracle::center_mask(p, g);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < g.pixels(); ++i) bad += (r.data()[i] == 1.0f) != m[i];
    CHECK(bad == 0);
  }
}

TEST_CASE("rasterize: half-open edges keep adjacent squares disjoint") {
  const GridSpec g{6, 6, {0.0, 0.0, 1.0, 1.0}};  // centers on integer coordinates
  auto a = make_rectangle(0, 0, 3, 6), b = make_rectangle(3, 0, 6, 6);
  auto ra = rasterize_polygons({{a, 1.0f}}, g, 0.0f).raster;
  auto rb = rasterize_polygons({{b, 1.0f}}, g, 0.0f).raster;
  for (int row = 0; row < 6; ++row)
    for (int col = 0; col < 6; ++col) {
      CHECK(ra(row, col) + rb(row, col) == 1.0f);  // each center in exactly one
      CHECK((ra(row, col) == 1.0f) == contains(a, {double(col), double(row)}));
    }
}

TEST_CASE("rasterize: later polygons win, degenerate ones are reported") {
  const GridSpec g = unit_grid(6, 6);
  Polygon bad;
  bad.exterior = {{0, 0}, {1, 1}, {0, 0}};
  auto r = rasterize_polygons({{make_rectangle(0, 0, 6, 6), 1.0f}, {bad, 9.0f}, {make_rectangle(0, 0, 3, 3), 2.0f}},
                              g, 0.0f);
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(r.diagnostics[0].rfind("polygon 1:", 0) == 0);
  CHECK(r.raster(5, 0) == 2.0f);
  CHECK(r.raster(0, 5) == 1.0f);
}

TEST_CASE("polygon area and convexity") {
  CHECK(area(make_rectangle(0, 0, 4, 3)) == 12.0);
  Polygon p = make_rectangle(0, 0, 10, 10);
  p.holes.push_back(make_rectangle(2, 2, 4, 4).exterior);
  CHECK(area(p) == doctest::Approx(96.0));
  CHECK(is_convex(make_rectangle(0, 0, 1, 1).exterior));
  Ring l{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}, {0, 0}};
  CHECK_FALSE(is_convex(l));
}

TEST_CASE("overlap area agrees with Monte-Carlo oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 10);
  for (int k = 0; k < 10; ++k) {
    const double x0 = u(rng), y0 = u(rng), x1 = x0 + 1 + u(rng), y1 = y0 + 1 + u(rng);
    Polygon a = make_rectangle(x0, y0, x1, y1);
    Polygon b;
    b.exterior = {{2, 1}, {14, 3}, {12, 13}, {7, 6}, {3, 12}};  // concave
    const double exact = overlap_area(a, b, 0.01);
    const double mc = oracle::mc_overlap(a, b, 0, 0, 22, 22, 100000, 100 + k);
    const double sigma = std::sqrt(22.0 * 22.0 * std::max(mc, 1.0) / 100000.0);
    CHECK(std::abs(exact - mc) < 4 * sigma + 0.05);
  }
  // Both concave: lattice fallback.
  Polygon c, d;
  c.exterior = {{0, 0}, {8, 0}, {8, 8}, {4, 3}, {0, 8}};
  d.exterior = {{2, -1}, {10, 4}, {2, 9}, {5, 4}};
  const double fallback = overlap_area(c, d, 0.05);
  const double mc = oracle::mc_overlap(c, d, -1, -2, 11, 10, 100000, 7);
  CHECK(std::abs(fallback - mc) < 0.5);
}

TEST_CASE("resample: identity, replication, constant bilinear") {
  const GridSpec g = unit_grid(7, 5);
  RasterGrid src(g, 2, 0.0f);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-5, 5);
  for (float& v : src.data()) v = u(rng);
  auto same = resample_to_grid(src, g, ResampleMethod::Nearest);
  CHECK(same.data() == src.data());

  // 10 m source, 1 m destination.
  const GridSpec coarse{4, 3, {5.0, -5.0, 10.0, -10.0}};
  const GridSpec fine{40, 30, {0.5, -0.5, 1.0, -1.0}};
  RasterGrid c(coarse, 1, 0.0f);
  for (std::size_t i = 0; i < c.pixels(); ++i) c.data()[i] = float(i);
  auto f = resample_to_grid(c, fine, ResampleMethod::Nearest);
  for (int row = 0; row < 30; ++row)
    for (int col = 0; col < 40; ++col) CHECK(f(row, col) == c(row / 10, col / 10));

  RasterGrid k(coarse, 1, 4.25f);
  const GridSpec inner{20, 10, {6.3, -6.1, 1.3, -1.7}};
  auto b = resample_to_grid(k, inner, ResampleMethod::Bilinear);
  for (float v : b.data()) CHECK(v == doctest::Approx(4.25f));
}

TEST_CASE("resample: bilinear output stays within source range, outside is nodata") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-3, 8);
  const GridSpec coarse{6, 6, {5.0, -5.0, 10.0, -10.0}};
  RasterGrid c(coarse, 1, 0.0f);
  for (float& v : c.data()) v = u(rng);
  const auto [lo, hi] = std::minmax_element(c.data().begin(), c.data().end());
  const GridSpec fine{70, 70, {-4.5, 4.5, 1.0, -1.0}};  // overhangs the source
  auto f = resample_to_grid(c, fine, ResampleMethod::Bilinear);
  REQUIRE(f.nodata);
  int nodata = 0;
  for (float v : f.data()) {
    if (v == *f.nodata) {
      ++nodata;
      continue;
    }
    CHECK(v >= *lo);
    CHECK(v <= *hi);
  }
  CHECK(nodata > 0);
  CHECK_THROWS_WITH_AS(resample_to_grid(c, GridSpec{5, 5, {1000, 1000, 1, -1}}, ResampleMethod::Nearest),
                       doctest::Contains("empty intersection"), DataError);
  CHECK(parse_resample_method("bilinear") == ResampleMethod::Bilinear);
  CHECK_THROWS_AS(parse_resample_method("cubic"), DataError);
}

TEST_CASE("bsqf round trip and file naming") {
  const fs::path dir = fs::temp_directory_path() / "urbanfn_test_bsqf";
  fs::remove_all(dir);
  RasterGrid r(GridSpec{3, 2, {10.5, 20.5, 1.0, -1.0}}, 2, 0.0f);
  for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] = float(i) * 0.5f - 1.0f;
  r.nodata = -9999.0f;
  r.band_names = {"a", "b"};
  write_bsqf(dir / "x", r);
  CHECK(fs::exists(dir / "x.json"));
  CHECK(fs::file_size(dir / "x.bin") == 12 * sizeof(float));
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().extension() != ".tmp");
  for (const char* name : {"x", "x.json", "x.bin", "x.bsqf"}) {
    auto back = read_bsqf(bsqf_base(dir / name));
    CHECK(back.data() == r.data());
    CHECK(back.grid() == r.grid());
    CHECK(back.band_names == r.band_names);
    CHECK(back.nodata == r.nodata);
  }
  write_file_atomic(dir / "x.bin", "short");
  CHECK_THROWS_AS(read_bsqf(dir / "x"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("geojson round trip keeps rings, holes and properties") {
  Polygon p = make_rectangle(0, 0, 5, 4);
  p.holes.push_back(make_rectangle(1, 1, 2, 2).exterior);
  p.attributes = {{"fclass", "hospital"}, {"name", "St. X"}};
  auto back = parse_geojson(to_geojson({p}));
  REQUIRE(back.size() == 1);
  CHECK(back[0].exterior == normalized(p).exterior);
  CHECK(back[0].holes.size() == 1);
  CHECK(back[0].attributes == p.attributes);
  auto numeric = parse_geojson(R"({"type":"FeatureCollection","features":[{"type":"Feature",
    "properties":{"levels":3},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]})");
  CHECK(numeric[0].attributes.at("levels") == "3");
  CHECK_THROWS_AS(parse_geojson("{\"type\":\"FeatureCollection\",\"features\":[{\"type\":\"Feature\","
                                "\"geometry\":{\"type\":\"Point\",\"coordinates\":[0,0]}}]}"),
                  DataError);
}
