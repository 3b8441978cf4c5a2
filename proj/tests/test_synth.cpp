#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "urbanfn/error.hpp"
#include "urbanfn/eval.hpp"
#include "urbanfn/resample.hpp"
#include "urbanfn/synth.hpp"

using namespace urbanfn;

namespace {

const std::vector<SynthTile>& default_city() {
  static const std::vector<SynthTile> city = generate_city(CitySpec{});
  return city;
}

CitySpec small_spec() {
  CitySpec s;
  s.tile_size = 128;
  s.tiles_x = 2;
  s.tiles_y = 1;
  s.seed = 5;
  return s;
}

// Mean value of a coarse raster band over truth pixels of each class.
std::array<double, 8> class_means(const std::vector<SynthTile>& city, bool ntl) {
  std::array<double, 8> sum{}, n{};
  for (const auto& t : city) {
    const GridSpec& g = t.truth.labels.grid();
    const RasterGrid r = resample_to_grid(ntl ? t.ntl : t.bh, g, ResampleMethod::Nearest);
    for (std::size_t i = 0; i < g.pixels(); ++i) {
      const int c = int(t.truth.labels.data()[i]);
      if (!is_function(c)) continue;
      sum[std::size_t(c)] += r.band(0)[i];
      n[std::size_t(c)] += 1;
    }
  }
  for (int c = 1; c < 8; ++c) sum[std::size_t(c)] /= std::max(1.0, n[std::size_t(c)]);
  return sum;
}

}  // namespace

TEST_CASE("class proportions track the target") {
  const CitySpec spec;
  auto r = truth_report(default_city());
  for (int k = 0; k < 7; ++k) CHECK(std::abs(r.proportions[k] - spec.proportions[k]) <= 0.03);
  CHECK(r.building_count > 0);
  CHECK(r.building_pixels > 0);
}

TEST_CASE("AOI coverage is close to the configured share") {
  std::size_t buildings = 0, aois = 0;
  for (const auto& t : default_city()) {
    buildings += t.buildings.size();
    aois += t.aois.size();
  }
  const double cov = double(aois) / double(buildings);
  CHECK(cov >= 0.27);
  CHECK(cov <= 0.33);
}

TEST_CASE("modalities separate the classes") {
  const auto& city = default_city();
  auto bh = class_means(city, false), ntl = class_means(city, true);
  CHECK(bh[1] > bh[2]);
  CHECK(ntl[2] > ntl[1]);
  CHECK(nearest_profile_accuracy(city, CitySpec{}) >= 0.70);
}

TEST_CASE("weak labels agree with truth wherever they are labeled") {
  for (const auto& t : default_city()) {
    check_label_raster(t.weak);
    check_label_raster(t.truth);
    const auto& w = t.weak.labels.data();
    const auto& g = t.truth.labels.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] != 255.0f) REQUIRE(w[i] == g[i]);
      if (w[i] == 255.0f) REQUIRE(is_function(int(g[i])));
    }
  }
}

TEST_CASE("one footprint component per building polygon") {
  for (const auto& t : default_city()) {
    auto bc = count_buildings(reference_footprint(t.truth.labels));
    CHECK(bc.count == std::int64_t(t.buildings.size()));
    CHECK(t.truth_codes.size() == t.buildings.size());
  }
}

TEST_CASE("building polygons rasterize onto their truth class") {
  const auto& t = default_city().front();
  const GridSpec g = t.truth.labels.grid();
  for (std::size_t b = 0; b < std::min<std::size_t>(t.buildings.size(), 40); ++b) {
    auto mask = oracle::center_mask(t.buildings[b], g);
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) REQUIRE(int(t.truth.labels.data()[i]) == t.truth_codes[b]);
  }
}

TEST_CASE("full AOI coverage makes weak labels equal truth") {
  auto spec = small_spec();
  spec.aoi_coverage = 1.0;
  for (const auto& t : generate_city(spec)) {
    CHECK(t.weak.labels.data() == t.truth.labels.data());
    CHECK(t.aois.size() == t.buildings.size());
  }
  spec.aoi_coverage = 0.0;
  for (const auto& t : generate_city(spec)) {
    CHECK(t.aois.empty());
    for (std::size_t i = 0; i < t.truth.labels.data().size(); ++i)
      if (is_function(int(t.truth.labels.data()[i]))) REQUIRE(t.weak.supervision.data()[i] == 0.0f);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate_city(small_spec()), b = generate_city(small_spec());
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].oi.data() == b[i].oi.data());
    CHECK(a[i].bh.data() == b[i].bh.data());
    CHECK(a[i].ntl.data() == b[i].ntl.data());
    CHECK(a[i].weak.labels.data() == b[i].weak.labels.data());
  }
  auto spec = small_spec();
  spec.seed = 6;
  CHECK(generate_city(spec)[0].oi.data() != a[0].oi.data());
}

TEST_CASE("grids and shapes") {
  const CitySpec spec;
  auto tiles = generate_city(small_spec());
  const auto& t = tiles[1];
  CHECK(t.oi.bands() == 3);
  CHECK(t.oi.width() == 128);
  CHECK(t.bh.width() == 13);
  CHECK(t.ntl.bands() == 3);
  CHECK(t.tx == 1);
  const GridSpec g = tile_grid(spec, 1, 1), c = coarse_grid(spec, 1, 1);
  CHECK(g.transform.origin_x == 512.5);
  CHECK(g.transform.origin_y == -512.5);
  CHECK(c.transform.origin_x == 517.0);
  CHECK(c.width == 52);
  CHECK(tile_dir_name(7) == "tile_007");
}

TEST_CASE("spec validation and JSON round trip") {
  CitySpec s;
  s.validate();
  auto back = CitySpec::from_json(s.to_json());
  CHECK(back.to_json() == s.to_json());
  s.proportions[0] = 0.9;
  CHECK_THROWS_AS(s.validate(), DataError);
  s = CitySpec{};
  s.proportions[3] = -0.01;
  s.proportions[0] += 0.01;
  CHECK_THROWS_AS(s.validate(), DataError);
  s = CitySpec{};
  s.aoi_coverage = 1.5;
  CHECK_THROWS_AS(s.validate(), DataError);
  s = CitySpec{};
  s.block_size = 60;
  CHECK_THROWS_AS(s.validate(), DataError);
  CHECK_THROWS_AS(generate_city(s), DataError);
}

TEST_CASE("write_city lays out tiles and splits") {
  const auto dir = std::filesystem::temp_directory_path() / "urbanfn_test_city";
  std::filesystem::remove_all(dir);
  auto spec = small_spec();
  write_city(dir, spec, generate_city(spec), 1);
  std::ifstream in(dir / "city.json");
  auto j = nlohmann::json::parse(in);
  REQUIRE(j["tiles"].size() == 2);
  CHECK(j["tiles"][0]["split"] == "train");
  CHECK(j["tiles"][1]["split"] == "test");
  for (const char* f : {"buildings.geojson", "aois.geojson"}) CHECK(std::filesystem::exists(dir / "tile_001" / f));
  std::filesystem::remove_all(dir);
}
