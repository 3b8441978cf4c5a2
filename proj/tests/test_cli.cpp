#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "urbanfn/bsqf.hpp"
#include "urbanfn/error.hpp"
#include "urbanfn/render.hpp"

using namespace urbanfn;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "urbanfn_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(URBANFN_BIN) + " " + args + " >" + (kWork / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

struct Workdir {
  Workdir() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  ~Workdir() { fs::remove_all(kWork); }
};

}  // namespace

TEST_CASE("render: default palette gives nine distinct colors") {
  const Palette p = Palette::defaults();
  std::set<Rgb> colors;
  for (int c = 0; c < 8; ++c) colors.insert(p.color(c));
  colors.insert(p.color(255));
  CHECK(colors.size() == 9);
  CHECK_THROWS_AS(p.color(9), DataError);

  RasterGrid m(GridSpec{9, 2, {0.5, -0.5, 1, -1}}, 1, 0.0f);
  for (int c = 0; c < 8; ++c) m(0, c) = float(c);
  m(0, 8) = 255.0f;
  Image img = render_map(m, p);
  CHECK(img.width == 9);
  CHECK(img.height == 2);
  for (int c = 0; c < 9; ++c) {
    const Rgb want = p.color(c == 8 ? 255 : c);
    for (int k = 0; k < 3; ++k) CHECK(img.rgb[std::size_t(c) * 3 + std::size_t(k)] == want[std::size_t(k)]);
  }
  Image with_legend = render_map(m, p, true);
  CHECK(with_legend.height > img.height);

  const std::string png = encode_png(img);
  REQUIRE(png.size() > 8);
  CHECK(png.substr(1, 3) == "PNG");

  m(1, 1) = 12.0f;
  try {
    render_map(m, p);
    FAIL("no error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("12") != std::string::npos);
  }
}

TEST_CASE("cli: usage errors and exit codes") {
  Workdir w;
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("synth") == 1);
  CHECK(run("labelgen --data " + (kWork / "missing").string()) == 1);
  write_text(kWork / "bad.json", "{\"tile_size\": 100}");
  CHECK(run("synth --config " + (kWork / "bad.json").string() + " --out " + (kWork / "x").string()) == 2);
  write_text(kWork / "broken.json", "{");
  CHECK(run("synth --config " + (kWork / "broken.json").string() + " --out " + (kWork / "x").string()) == 2);
}

TEST_CASE("cli: small end-to-end chain") {
  Workdir w;
  const std::string data = (kWork / "data").string(), runs = (kWork / "run").string(),
                    pred = (kWork / "pred").string();
  write_text(kWork / "city.json", R"({"tile_size": 128, "tiles_x": 2, "tiles_y": 1})");
  write_text(kWork / "train.json", R"({"epochs": 1, "crops_per_tile": 4, "crop_size": 32, "batch_size": 4})");
  REQUIRE(run("synth --config " + (kWork / "city.json").string() + " --out " + data + " --seed 3 --holdout 1") == 0);
  CHECK(fs::exists(kWork / "data" / "truth_report.json"));
  REQUIRE(run("labelgen --data " + data) == 0);
  REQUIRE(run("cubes --data " + data) == 0);
  CHECK(fs::exists(kWork / "data" / "normalizer.json"));
  REQUIRE(run("--threads 1 train --data " + data + " --config " + (kWork / "train.json").string() + " --out " +
              runs + " --seed 2") == 0);
  CHECK(fs::exists(kWork / "run" / "loss.csv"));
  CHECK(run("train --data " + data + " --out " + runs + " --labels nonsense") == 1);
  REQUIRE(run("infer --data " + data + " --checkpoint " + runs + "/checkpoint_final --out " + pred +
              " --window 64 --overlap 8") == 0);
  REQUIRE(fs::exists(kWork / "pred" / "tile_001"));
  CHECK_FALSE(fs::exists(kWork / "pred" / "tile_000"));

  const std::string pair = " --pred " + pred + "/tile_001/classmap --ref " + data + "/tile_001/truth_labels";
  const std::string report = (kWork / "eval.json").string();
  REQUIRE(run("eval" + pair + " --out " + report) == 0);
  auto j = read_json(report);
  for (const char* key : {"oa", "kappa", "fwiou", "proportion", "footprint_iou", "building_count", "building_area"})
    CHECK_MESSAGE(j.contains(key), std::string(key));
  CHECK(j["oa"].get<double>() >= 0.0);
  CHECK(j["oa"].get<double>() <= 1.0);
  CHECK(fs::exists(kWork / "eval.confusion.csv"));

  const std::string pts_report = (kWork / "pts.json").string();
  REQUIRE(run("eval" + pair + " --sample-points 200 --seed 4 --out " + pts_report) == 0);
  CHECK(read_json(pts_report)["point_based"] == true);
  CHECK(read_json(pts_report)["evaluated_samples"].get<int>() <= 200);

  const std::string stat = (kWork / "stat.json").string();
  REQUIRE(run("report --pred " + data + "/tile_001/truth_labels --reference 0.5 0.2 0.2 0.1 --out " + stat) == 0);
  auto sj = read_json(stat);
  CHECK(sj["l1_distance"].get<double>() >= 0.0);
  CHECK(sj["l1_distance"].get<double>() <= 2.0);
  CHECK(run("report --pred " + data + "/tile_001/truth_labels --reference 0.5 0.2 0.2 0.2 --out " + stat) == 2);
  const std::string png = (kWork / "map.png").string();
  CHECK(run("render --in " + data + "/tile_001/truth_labels --out " + png + " --legend") == 0);
  CHECK(fs::file_size(png) > 0);

  RasterGrid bad(GridSpec{4, 4, {0.5, -0.5, 1, -1}}, 1, 42.0f);
  write_bsqf(kWork / "bad", bad);
  CHECK(run("render --in " + (kWork / "bad").string() + " --out " + (kWork / "bad.png").string()) == 2);
  CHECK_FALSE(fs::exists(kWork / "bad.png"));
}
