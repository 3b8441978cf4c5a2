#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "urbanfn/bsqf.hpp"
#include "urbanfn/cube.hpp"
#include "urbanfn/error.hpp"
#include "urbanfn/eval.hpp"
#include "urbanfn/geojson.hpp"
#include "urbanfn/io.hpp"
#include "urbanfn/labelgen.hpp"
#include "urbanfn/nn/parallel.hpp"
#include "urbanfn/pipeline.hpp"
#include "urbanfn/random.hpp"
#include "urbanfn/render.hpp"
#include "urbanfn/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace urbanfn;

namespace {

struct TileEntry {
  int id;
  fs::path dir;
  std::string split;
};

std::vector<TileEntry> load_manifest(const fs::path& data) {
  json j;
  try {
    j = json::parse(read_file(data / "city.json"));
  } catch (const json::exception& e) {
    throw DataError("city.json: " + std::string(e.what()));
  }
  if (!j.contains("tiles") || !j["tiles"].is_array()) throw DataError("city.json: missing tiles list");
  std::vector<TileEntry> out;
  for (const auto& t : j["tiles"])
    out.push_back({t.at("id").get<int>(), t.at("dir").get<std::string>(), t.value("split", "train")});
  return out;
}

std::vector<TileEntry> select(const std::vector<TileEntry>& tiles, const std::string& split) {
  std::vector<TileEntry> out;
  for (const auto& t : tiles)
    if (split == "all" || t.split == split) out.push_back(t);
  if (out.empty()) throw DataError("no tiles in split '" + split + "'");
  return out;
}

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

LabelRaster read_labels(const fs::path& dir, const std::string& kind) {
  if (kind == "truth")
    return {read_bsqf(dir / "truth_labels"), read_bsqf(dir / "truth_supervision")};
  LabelRaster lr{read_bsqf(dir / "labels"), read_bsqf(dir / "supervision")};
  check_label_raster(lr);
  if (kind == "background") return treat_unlabeled_as_background(lr);
  return lr;
}

Cube read_cube(const fs::path& dir) {
  Cube c;
  c.raster = read_bsqf(dir / "cube");
  c.normalized = true;
  return c;
}

int run_synth(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed,
              int holdout) {
  CitySpec spec = config.empty() ? CitySpec{} : CitySpec::from_json(read_config(config));
  if (seed) spec.seed = *seed;
  const auto tiles = generate_city(spec);
  if (holdout < 0 || holdout >= int(tiles.size()))
    throw DataError("holdout must leave at least one training tile");
  write_city(out, spec, tiles, holdout);
  const auto report = truth_report(tiles);
  write_file_atomic(fs::path(out) / "truth_report.json", to_json(report).dump(2) + "\n");
  std::cout << "wrote " << tiles.size() << " tiles, " << report.building_count << " buildings to "
            << out << "\n";
  return 0;
}

int run_labelgen(const std::string& data, const std::string& config, std::string out) {
  if (out.empty()) out = data;
  const ClassMap cm = config.empty() ? ClassMap::defaults() : ClassMap::from_json(read_file(config));
  std::size_t labeled = 0, total = 0, notes = 0;
  for (const auto& t : load_manifest(data)) {
    const fs::path in = fs::path(data) / t.dir;
    const auto buildings = read_geojson(in / "buildings.geojson");
    std::vector<std::pair<Polygon, FunctionClass>> aois;
    for (const auto& a : read_geojson(in / "aois.geojson")) {
      const auto r = remap_aoi(a.attributes, cm);
      if (r.cls)
        aois.emplace_back(a, *r.cls);
      else
        std::cerr << t.dir.string() << ": " << r.diagnostic << "\n", ++notes;
    }
    const GridSpec grid = read_bsqf(in / "oi").grid();
    auto assigned = assign_building_functions(buildings, aois);
    auto lr = build_label_raster(assigned.buildings, grid);
    for (const auto& d : assigned.diagnostics) std::cerr << t.dir.string() << ": " << d << "\n", ++notes;
    for (const auto& d : lr.diagnostics) std::cerr << t.dir.string() << ": " << d << "\n", ++notes;
    for (const auto& b : assigned.buildings) labeled += b.code != kUnlabeled;
    total += assigned.buildings.size();
    const fs::path dst = fs::path(out) / t.dir;
    write_bsqf(dst / "labels", lr.raster.labels);
    write_bsqf(dst / "supervision", lr.raster.supervision);
  }
  std::cout << "labeled " << labeled << " of " << total << " buildings (" << notes << " diagnostics)\n";
  return 0;
}

int run_cubes(const std::string& data, const std::string& config, std::string out) {
  if (out.empty()) out = data;
  const json cfg = read_config(config);
  const auto method = parse_resample_method(cfg.value("resample", std::string("nearest")));
  const auto tiles = load_manifest(data);
  std::vector<Cube> cubes;
  std::vector<const Cube*> fit;
  for (const auto& t : tiles) {
    const fs::path in = fs::path(data) / t.dir;
    const RasterGrid oi = read_bsqf(in / "oi");
    cubes.push_back(assemble_cube(oi, read_bsqf(in / "bh"), read_bsqf(in / "ntl"), oi.grid(), method));
  }
  for (std::size_t i = 0; i < tiles.size(); ++i)
    if (tiles[i].split == "train") fit.push_back(&cubes[i]);
  if (fit.empty())
    for (const auto& c : cubes) fit.push_back(&c);
  const NormStats stats = fit_normalizer(fit);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    normalize(cubes[i], stats);
    write_bsqf(fs::path(out) / tiles[i].dir / "cube", cubes[i].raster);
  }
  write_file_atomic(fs::path(out) / "normalizer.json", norm_stats_to_json(stats));
  std::cout << "wrote " << tiles.size() << " cubes (normalizer fitted on " << fit.size() << ")\n";
  return 0;
}

int run_train(const std::string& data, const std::string& config, const std::string& out,
              std::optional<std::uint64_t> seed, const std::string& labels) {
  TrainConfig cfg = TrainConfig::from_json(read_config(config));
  if (seed) cfg.seed = *seed;
  std::vector<Cube> cubes;
  std::vector<LabelRaster> lrs;
  const auto tiles = select(load_manifest(data), "train");
  for (const auto& t : tiles) {
    cubes.push_back(read_cube(fs::path(data) / t.dir));
    lrs.push_back(read_labels(fs::path(data) / t.dir, labels));
  }
  std::vector<TrainTile> tt;
  for (std::size_t i = 0; i < tiles.size(); ++i) tt.push_back({&cubes[i], &lrs[i], tiles[i].id});
  write_file_atomic(fs::path(out) / "train_config.json", cfg.to_json().dump(2) + "\n");
  const auto res = train(cfg, tt, fs::path(out));
  std::cout << "trained " << res.history.size() << " steps, loss " << res.history.front().loss
            << " -> " << res.history.back().loss << "\n";
  return 0;
}

int run_infer(const std::string& data, const std::string& ckpt_dir, const std::string& config,
              const std::string& out, const std::string& split, int window, int overlap) {
  const json cfg = read_config(config);
  window = cfg.value("window", window);
  overlap = cfg.value("overlap", overlap);
  const auto ckpt = nn::read_checkpoint(ckpt_dir);
  const auto tiles = select(load_manifest(data), split);
  for (const auto& t : tiles) {
    const auto cm = infer_tile(ckpt, read_cube(fs::path(data) / t.dir), window, overlap);
    const fs::path dst = fs::path(out) / t.dir;
    write_bsqf(dst / "classmap", cm.raster);
    write_bsqf(dst / "footprint", extract_footprint(cm.raster));
  }
  write_file_atomic(fs::path(out) / "provenance.json",
                    json{{"checkpoint", ckpt.id()}, {"window", window}, {"overlap", overlap}}.dump(2) + "\n");
  std::cout << "inferred " << tiles.size() << " tiles with " << ckpt.id() << "\n";
  return 0;
}

int run_eval(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
             const std::string& points_file, int sample_points, const std::string& config,
             const std::string& out, std::uint64_t seed) {
  if (preds.size() != refs.size()) throw DataError("eval: --pred and --ref must pair up");
  const json cfg = read_config(config);
  sample_points = cfg.value("sample_points", sample_points);
  std::vector<RasterGrid> p, r;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    p.push_back(read_bsqf(bsqf_base(preds[i])));
    r.push_back(read_bsqf(bsqf_base(refs[i])));
  }
  std::optional<std::vector<std::vector<PixelPoint>>> points;
  if (!points_file.empty()) {
    points = points_from_json(read_file(points_file));
    if (points->size() != r.size()) throw DataError("eval: points file must list one set per reference");
  } else if (sample_points > 0) {
    points.emplace();
    for (std::size_t i = 0; i < r.size(); ++i)
      points->push_back(sample_validation_points(r[i], sample_points, derive_seed(seed, i)));
  }
  std::vector<const RasterGrid*> pp, rr;
  for (std::size_t i = 0; i < p.size(); ++i) pp.push_back(&p[i]), rr.push_back(&r[i]);
  ConfusionMatrix cm;
  const auto report = evaluate(pp, rr, points, &cm);
  std::cout << summary_table(report);
  if (!out.empty()) {
    const fs::path o(out);
    write_file_atomic(o, to_json(report).dump(2) + "\n");
    write_file_atomic(fs::path(o).replace_extension(".confusion.csv"), cm.to_csv());
    if (points && points_file.empty())
      write_file_atomic(fs::path(o).replace_extension(".points.json"), points_to_json(*points));
  }
  return 0;
}

Palette palette_from(const json& j) {
  Palette p = Palette::defaults();
  for (const auto& [key, value] : j.items()) {
    const int code = std::stoi(key);
    const auto rgb = value.get<std::array<int, 3>>();
    const Rgb c{std::uint8_t(rgb[0]), std::uint8_t(rgb[1]), std::uint8_t(rgb[2])};
    if (code == 255)
      p.unlabeled = c;
    else if (code >= 0 && code <= 7)
      p.classes[std::size_t(code)] = c;
    else
      throw DataError("palette: no class code " + key);
  }
  return p;
}

int run_render(const std::string& in, const std::string& config, const std::string& out, bool legend) {
  const Palette palette = config.empty() ? Palette::defaults() : palette_from(read_config(config));
  write_png(out, render_map(read_bsqf(bsqf_base(in)), palette, legend));
  return 0;
}

int run_report(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
               const std::vector<double>& reference, const std::string& config, const std::string& out) {
  const GroupMapping mapping =
      config.empty() ? default_group_mapping() : group_mapping_from_json(read_file(config));
  std::vector<RasterGrid> p, r;
  for (const auto& f : preds) p.push_back(read_bsqf(bsqf_base(f)));
  for (const auto& f : refs) r.push_back(read_bsqf(bsqf_base(f)));
  std::vector<const RasterGrid*> pp, rr;
  for (const auto& x : p) pp.push_back(&x);
  for (const auto& x : r) rr.push_back(&x);
  std::array<double, kGroups> ref{};
  if (!reference.empty()) {
    if (reference.size() != kGroups) throw DataError("report: --reference needs 4 proportions");
    std::copy(reference.begin(), reference.end(), ref.begin());
  } else if (!rr.empty()) {
    ref = group_proportions(function_proportions(rr), mapping);
  } else {
    throw DataError("report: give --ref rasters or --reference proportions");
  }
  const auto stat = statistical_comparison(pp, ref, mapping);
  const std::string text = to_json(stat).dump(2) + "\n";
  if (!out.empty()) write_file_atomic(out, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Building function mapping from multi-modal rasters and weak AOI labels"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = int(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--threads", threads, "Worker threads")->envname("URBANFN_THREADS")->check(CLI::PositiveNumber);

  std::string config, out, data, ckpt, points, split = "test", labels = "weak", in;
  std::optional<std::uint64_t> seed;
  int holdout = 2, window = 256, overlap = 32, sample_points = 0;
  bool legend = false;
  std::vector<std::string> preds, refs;
  std::vector<double> reference;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic city");
  synth->add_option("--config", config, "CitySpec JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Override the city seed");
  synth->add_option("--holdout", holdout, "Trailing tiles marked as test split");

  auto* labelgen = app.add_subcommand("labelgen", "Build weak label rasters from buildings and AOIs");
  labelgen->add_option("--data", data, "City directory")->required()->check(CLI::ExistingDirectory);
  labelgen->add_option("--config", config, "Tag to class map JSON")->check(CLI::ExistingFile);
  labelgen->add_option("--out", out, "Output directory (default: --data)");

  auto* cubes = app.add_subcommand("cubes", "Assemble and normalize input cubes");
  cubes->add_option("--data", data, "City directory")->required()->check(CLI::ExistingDirectory);
  cubes->add_option("--config", config, "JSON with \"resample\": nearest|bilinear")->check(CLI::ExistingFile);
  cubes->add_option("--out", out, "Output directory (default: --data)");

  auto* trn = app.add_subcommand("train", "Train the network on the train split");
  trn->add_option("--data", data, "City directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--config", config, "TrainConfig JSON")->check(CLI::ExistingFile);
  trn->add_option("--out", out, "Run directory")->required();
  trn->add_option("--seed", seed, "Override the training seed");
  trn->add_option("--labels", labels, "weak, truth or background")
      ->check(CLI::IsMember({"weak", "truth", "background"}));

  auto* infer = app.add_subcommand("infer", "Predict class maps and footprints");
  infer->add_option("--data", data, "City directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--checkpoint", ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--config", config, "JSON with window and overlap")->check(CLI::ExistingFile);
  infer->add_option("--out", out, "Prediction directory")->required();
  infer->add_option("--split", split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  infer->add_option("--window", window, "Window size in pixels");
  infer->add_option("--overlap", overlap, "Window overlap in pixels");

  auto* ev = app.add_subcommand("eval", "Evaluate class maps against reference labels");
  ev->add_option("--pred", preds, "Predicted class map (repeatable)")->required();
  ev->add_option("--ref", refs, "Reference label raster (repeatable, paired with --pred)")->required();
  auto* pts = ev->add_option("--points", points, "Validation points JSON")->check(CLI::ExistingFile);
  ev->add_option("--sample-points", sample_points, "Draw N stratified points per reference")->excludes(pts);
  ev->add_option("--config", config, "JSON with sample_points")->check(CLI::ExistingFile);
  ev->add_option("--out", out, "Report JSON");
  ev->add_option("--seed", seed, "Point sampling seed");

  auto* render = app.add_subcommand("render", "Render a class map as PNG");
  render->add_option("--in", in, "Class map or label raster")->required();
  render->add_option("--config", config, "Palette JSON {code: [r,g,b]}")->check(CLI::ExistingFile);
  render->add_option("--out", out, "PNG path")->required();
  render->add_flag("--legend", legend, "Append a legend strip");

  auto* report = app.add_subcommand("report", "Four-group statistical comparison");
  report->add_option("--pred", preds, "Predicted class map (repeatable)")->required();
  auto* rf = report->add_option("--ref", refs, "Reference label rasters (repeatable)");
  report->add_option("--reference", reference, "Four reference group proportions")->excludes(rf);
  report->add_option("--config", config, "Group mapping JSON")->check(CLI::ExistingFile);
  report->add_option("--out", out, "StatReport JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    nn::set_thread_count(threads);
    if (*synth) return run_synth(config, out, seed, holdout);
    if (*labelgen) return run_labelgen(data, config, out);
    if (*cubes) return run_cubes(data, config, out);
    if (*trn) return run_train(data, config, out, seed, labels);
    if (*infer) return run_infer(data, ckpt, config, out, split, window, overlap);
    if (*ev) return run_eval(preds, refs, points, sample_points, config, out, seed.value_or(1));
    if (*render) return run_render(in, config, out, legend);
    if (*report) return run_report(preds, refs, reference, config, out);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
