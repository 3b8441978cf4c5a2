// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "urbanfn/error.hpp"
#include "urbanfn/eval.hpp"
#include "urbanfn/pipeline.hpp"
#include "urbanfn/rasterize.hpp"
#include "urbanfn/synth.hpp"

using namespace urbanfn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("criterion %d %s: %s (%s; %.1fs)\n", id, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Logits that put probability p on class k, the rest spread evenly.
void set_pixel_prob(nn::Tensor& z, int row, int col, int k, double p) {
  const double rest = (1.0 - p) / 7.0;
  for (int c = 0; c < 8; ++c) z.at(0, c, row, col) = float(std::log(c == k ? p : rest));
}

double plain_ce(const nn::Tensor& z, const std::vector<std::uint8_t>& labels) {
  const int plane = int(z.plane());
  double total = 0;
  for (int n = 0; n < z.n(); ++n)
    for (int px = 0; px < plane; ++px) {
      double m = -1e300;
      for (int c = 0; c < 8; ++c) m = std::max(m, double(z.sample(n)[c * plane + px]));
      double s = 0;
      for (int c = 0; c < 8; ++c) s += std::exp(double(z.sample(n)[c * plane + px]) - m);
      total += m + std::log(s) - double(z.sample(n)[labels[std::size_t(n * plane + px)] * plane + px]);
    }
  return total / double(z.n() * plane);
}

Outcome criterion_loss() {
  using nn::Tensor;
  using nn::Shape;
  double worst = 0;
  Tensor z(Shape{1, 8, 1, 1});
  std::vector<std::uint8_t> lab{3}, one{1};
  worst = std::max(worst, std::abs(nn::masked_ce_loss(z, lab, one).loss - std::log(8.0)));
  Tensor sure(Shape{1, 8, 1, 1}, -1e4f);
  sure.at(0, 5, 0, 0) = 0.0f;
  std::vector<std::uint8_t> lab5{5};
  worst = std::max(worst, std::abs(nn::masked_ce_loss(sure, lab5, one).loss));
  Tensor patch(Shape{1, 8, 2, 2});
  set_pixel_prob(patch, 0, 0, 1, 0.5);
  set_pixel_prob(patch, 0, 1, 2, 0.25);
  set_pixel_prob(patch, 1, 0, 7, 0.1);
  set_pixel_prob(patch, 1, 1, 0, 0.9);
  const double hand = -(std::log(0.5) + std::log(0.25) + std::log(0.1)) / 3.0;
  worst = std::max(worst, std::abs(nn::masked_ce_loss(patch, std::vector<std::uint8_t>{1, 2, 7, 0},
                                                      std::vector<std::uint8_t>{1, 1, 1, 0})
                                        .loss -
                                    hand));

  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> cls(0, 7), bit(0, 2);
  bool invariant = true;
  double plain_gap = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x(Shape{2, 8, 6, 7});
    gradcheck::fill_uniform(x, rng, -4, 4);
    std::vector<std::uint8_t> labels(84), sup(84), ones(84, 1), full(84);
    for (std::size_t i = 0; i < 84; ++i) {
      sup[i] = bit(rng) ? 1 : 0;
      full[i] = std::uint8_t(cls(rng));
      labels[i] = sup[i] ? full[i] : std::uint8_t(255);
    }
    sup[0] = 1;
    labels[0] = full[0];
    Tensor d1, d2;
    const auto a = nn::masked_ce_loss(x, labels, sup, &d1);
    Tensor x2 = x;
    for (int n = 0; n < 2; ++n)
      for (int px = 0; px < 42; ++px)
        if (!sup[std::size_t(n * 42 + px)])
          for (int c = 0; c < 8; ++c) x2.sample(n)[c * 42 + px] = float(cls(rng)) * 50.0f - 175.0f;
    const auto b = nn::masked_ce_loss(x2, labels, sup, &d2);
    invariant = invariant && a.loss == b.loss && (d1.values == d2.values).all();
    plain_gap = std::max(plain_gap, std::abs(nn::masked_ce_loss(x, full, ones).loss - plain_ce(x, full)));
  }
  const bool pass = worst < 1e-6 && invariant && plain_gap < 1e-7;
  return {pass, "example error " + fmt("%.2e", worst) + ", masking invariance " + (invariant ? "exact" : "broken") +
                    ", plain CE gap " + fmt("%.2e", plain_gap)};
}

Outcome criterion_gradients() {
  std::mt19937_64 rng(202);
  double worst = 0;
  int instances = 0, checked = 0, skipped = 0;
  for (int i = 0; i < 20; ++i) {
    for (auto r : {gradcheck::conv_instance<double>(rng, 3, 1), gradcheck::conv_instance<double>(rng, 3, 2),
                   gradcheck::conv_instance<double>(rng, 1, 1), gradcheck::relu_instance<double>(rng),
                   gradcheck::resize_instance<double>(rng, 2.0), gradcheck::resize_instance<double>(rng, 0.5),
                   gradcheck::concat_instance<double>(rng), gradcheck::loss_instance<double>(rng)}) {
      worst = std::max(worst, r.max_rel);
      checked += r.checked;
      ++instances;
    }
    auto h = gradcheck::hrnet_instance<double>(rng, 300 + std::uint64_t(i), 60);
    worst = std::max(worst, h.max_rel);
    checked += h.checked;
    skipped += h.skipped;
    ++instances;
  }
  return {worst < gradcheck::kMaxRel && skipped * 5 < checked,
          std::to_string(instances) + " instances, " + std::to_string(checked) + " coordinates, max rel error " +
              fmt("%.2e", worst) + ", " + std::to_string(skipped) + " kink-skipped"};
}

Outcome criterion_metrics() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> cls(0, 8);
  const GridSpec g{64, 64, {0.5, -0.5, 1, -1}};
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    RasterGrid pred(g, 1, 0.0f), ref(g, 1, 0.0f);
    for (std::size_t i = 0; i < g.pixels(); ++i) {
      pred.data()[i] = float(cls(rng) % 8);
      const int r = cls(rng);
      ref.data()[i] = r == 8 ? 255.0f : float(r);
    }
    std::vector<std::vector<double>> tally(8, std::vector<double>(8, 0.0));
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < g.pixels(); ++i) {
      const int p = int(pred.data()[i]), r = int(ref.data()[i]);
      if (r != 255) tally[std::size_t(r)][std::size_t(p)] += 1;
      const bool pb = p >= 1 && p <= 7, rb = r != 0;
      tp += pb && rb;
      fp += pb && !rb;
      fn += !pb && rb;
    }
    const auto want = oracle::metrics(tally);
    const auto got = evaluate({&pred}, {&ref}, std::nullopt);
    const double f1 = 2 * tp / (2 * tp + fp + fn), iou = tp / (tp + fp + fn);
    for (double d : {got.classification.oa - want.oa, got.classification.kappa - want.kappa,
                     got.classification.fwiou - want.fwiou, got.footprint.f1 - f1, got.footprint.iou - iou})
      worst = std::max(worst, std::abs(d));
  }
  ConfusionMatrix cm;
  cm.counts(0, 0) = 50;
  cm.counts(0, 1) = 10;
  cm.counts(1, 0) = 10;
  cm.counts(1, 1) = 30;
  const auto m = classification_metrics(cm);
  const bool example = std::abs(m.oa - 0.8) < 1e-12 && std::abs(m.kappa - 0.5833) <= 1e-4 &&
                       std::abs(m.fwiou - 0.6686) <= 1e-4;
  return {worst < 1e-12 && example, "max oracle gap " + fmt("%.2e", worst) + ", example OA " + fmt("%.4f", m.oa) +
                                        " Kappa " + fmt("%.4f", m.kappa) + " FWIoU " + fmt("%.4f", m.fwiou)};
}

Outcome criterion_rasterize() {
  std::mt19937_64 rng(404);
  const GridSpec g{32, 28, {0.5, 27.5, 1, -1}};
  std::uniform_int_distribution<int> nv(3, 10), ix(-12, 140), iy(-12, 124);
  int polygons = 0;
  std::size_t bad = 0, pixels = 0;
  while (polygons < 200) {
    Polygon p;
    const int n = nv(rng);
    for (int i = 0; i < n; ++i) p.exterior.push_back({ix(rng) / 4.0, iy(rng) / 4.0});
    if (polygons % 4 == 0) {
      Ring hole;
      for (int i = 0; i < 4; ++i) hole.push_back({ix(rng) / 4.0, iy(rng) / 4.0});
      p.holes.push_back(hole);
    }
    if (polygon_defect(p)) continue;
    ++polygons;
    const auto r = rasterize_polygons({{p, 1.0f}}, g, 0.0f).raster;
    const auto m = oracle::center_mask(p, g);
    for (std::size_t i = 0; i < g.pixels(); ++i) bad += (r.data()[i] == 1.0f) != m[i];
    pixels += g.pixels();
  }
  return {bad == 0, std::to_string(polygons) + " polygons, " + std::to_string(bad) + " of " +
                        std::to_string(pixels) + " pixels differ"};
}

Outcome criterion_components() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> size(1, 128);
  std::uniform_real_distribution<double> density(0.05, 0.65);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const int w = size(rng), h = size(rng);
    std::bernoulli_distribution b(density(rng));
    RasterGrid r(GridSpec{w, h, {0.5, -0.5, 1, -1}}, 1, 0.0f);
    std::vector<int> v(std::size_t(w) * h);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = b(rng);
      r.data()[i] = float(v[i]);
    }
    mismatches += count_buildings(r).count != oracle::flood_count(v, w, h);
  }
  RasterGrid corner(GridSpec{4, 4, {0.5, -0.5, 1, -1}}, 1, 0.0f);
  for (int i : {0, 1, 4, 5, 10, 11, 14, 15}) corner.data()[std::size_t(i)] = 1.0f;
  const auto touching = count_buildings(corner).count;
  return {mismatches == 0 && touching == 1,
          std::to_string(mismatches) + " of 100 grids differ, corner-touching squares count " + std::to_string(touching)};
}

// Shared state for the synthetic-city criteria.
struct City {
  CitySpec spec;
  std::vector<SynthTile> tiles;
  std::vector<Cube> cubes;
  std::vector<int> train_ids, test_ids;
};

City build_city() {
  City c;
  c.tiles = generate_city(c.spec);
  const int holdout = 2;
  std::vector<const Cube*> fit;
  for (const auto& t : c.tiles) c.cubes.push_back(assemble_cube(t.oi, t.bh, t.ntl, t.truth.labels.grid()));
  for (int i = 0; i < int(c.tiles.size()); ++i)
    (i < int(c.tiles.size()) - holdout ? c.train_ids : c.test_ids).push_back(i);
  for (int i : c.train_ids) fit.push_back(&c.cubes[std::size_t(i)]);
  const NormStats stats = fit_normalizer(fit);
  for (auto& cube : c.cubes) normalize(cube, stats);
  return c;
}

struct RunResult {
  EvalReport eval;
  StatReport stat;
};

RunResult train_and_eval(const City& city, const std::string& variant, std::uint64_t seed) {
  std::vector<LabelRaster> labels;
  for (const auto& t : city.tiles)
    labels.push_back(variant == "full" ? t.truth : variant == "background" ? treat_unlabeled_as_background(t.weak) : t.weak);
  std::vector<TrainTile> train_tiles;
  for (int i : city.train_ids) train_tiles.push_back({&city.cubes[std::size_t(i)], &labels[std::size_t(i)], i});
  TrainConfig cfg;
  cfg.seed = seed;
  const auto result = train(cfg, train_tiles);

  std::vector<RasterGrid> preds;
  for (int i : city.test_ids) preds.push_back(infer_tile(result.checkpoint, city.cubes[std::size_t(i)], 256, 32).raster);
  std::vector<const RasterGrid*> p, r;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    p.push_back(&preds[k]);
    r.push_back(&city.tiles[std::size_t(city.test_ids[k])].truth.labels);
  }
  RunResult out;
  out.eval = evaluate(p, r, std::nullopt);
  const auto mapping = default_group_mapping();
  out.stat = statistical_comparison(p, group_proportions(function_proportions(r), mapping), mapping);
  std::printf("  run %-10s seed %llu: OA %.4f Kappa %.4f footprint IoU %.4f L1 %.4f\n", variant.c_str(),
              static_cast<unsigned long long>(seed), out.eval.classification.oa, out.eval.classification.kappa,
              out.eval.footprint.iou, out.stat.l1_distance);
  std::fflush(stdout);
  return out;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion_determinism() {
  const fs::path work = fs::temp_directory_path() / "urbanfn_acceptance_chain";
  fs::remove_all(work);
  for (const char* name : {"a", "b"}) {
    const std::string cmd = std::string("URBANFN=") + URBANFN_BIN + " " + URBANFN_CHAIN + " " +
                            (work / name).string() + " 42 > " + (work.string() + "_" + name + ".log") + " 2>&1";
    fs::create_directories(work);
    if (const int code = run_command(cmd); code != 0)
      return {false, std::string("chain run ") + name + " exited with " + std::to_string(code)};
  }
  std::size_t compared = 0, differing = 0;
  for (const char* sub : {"run/checkpoint_final", "pred", "eval"}) {
    for (const auto& e : fs::recursive_directory_iterator(work / "a" / sub)) {
      if (!e.is_regular_file()) continue;
      const fs::path other = work / "b" / fs::relative(e.path(), work / "a");
      ++compared;
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differing;
    }
  }
  fs::remove_all(work);
  fs::remove(work.string() + "_a.log");
  fs::remove(work.string() + "_b.log");
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  report(1, "masked cross-entropy", criterion_loss);
  report(2, "gradient fidelity", criterion_gradients);
  report(3, "metric oracle equivalence", criterion_metrics);
  report(4, "rasterization exactness", criterion_rasterize);
  report(5, "connected components", criterion_components);

  City city;
  std::vector<double> weak_oa, full_oa, bg_oa;
  RunResult weak_first;
  bool city_ok = true;
  std::string city_error;
  try {
    city = build_city();
    for (std::uint64_t seed : {1, 2, 3}) {
      auto w = train_and_eval(city, "weak", seed);
      if (seed == 1) weak_first = w;
      weak_oa.push_back(w.eval.classification.oa);
      full_oa.push_back(train_and_eval(city, "full", seed).eval.classification.oa);
      bg_oa.push_back(train_and_eval(city, "background", seed).eval.classification.oa);
    }
  } catch (const std::exception& e) {
    city_ok = false;
    city_error = e.what();
  }

  report(6, "end-to-end synthetic reproduction", [&]() -> Outcome {
    if (!city_ok) return {false, "exception: " + city_error};
    const auto& m = weak_first.eval;
    const bool pass = city.tiles.size() >= 8 && m.classification.oa >= 0.80 && m.footprint.iou >= 0.70 &&
                      m.classification.kappa_defined && m.classification.kappa >= 0.60;
    return {pass, std::to_string(city.tiles.size()) + " tiles, held-out OA " + fmt("%.4f", m.classification.oa) +
                      " Kappa " + fmt("%.4f", m.classification.kappa) + " footprint IoU " +
                      fmt("%.4f", m.footprint.iou)};
  });
  report(7, "semi-supervision benefit", [&]() -> Outcome {
    if (!city_ok) return {false, "exception: " + city_error};
    const double w = median3(weak_oa), f = median3(full_oa), b = median3(bg_oa);
    return {w >= f - 0.10 && w > b,
            "median OA weak " + fmt("%.4f", w) + ", full " + fmt("%.4f", f) + ", background " + fmt("%.4f", b)};
  });
  report(8, "statistical-level comparison", [&]() -> Outcome {
    if (!city_ok) return {false, "exception: " + city_error};
    const auto mapping = default_group_mapping();
    const auto table = CitySpec{}.proportions;
    const auto groups = group_proportions(table, mapping);
    const double sum = groups[0] + groups[1] + groups[2] + groups[3];
    const double table_sum = std::accumulate(table.begin(), table.end(), 0.0);
    const bool table_ok = std::abs(sum - 1.0) < 1e-9 && std::abs(table_sum - 1.0) < 1e-9;
    return {weak_first.stat.l1_distance <= 0.10 && table_ok,
            "L1 " + fmt("%.4f", weak_first.stat.l1_distance) + ", reference table sums to " + fmt("%.6f", table_sum) +
                " and maps to groups summing to " + fmt("%.6f", sum)};
  });
  report(9, "determinism", criterion_determinism);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
