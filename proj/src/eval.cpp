#include "urbanfn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "urbanfn/pipeline.hpp"
#include "urbanfn/random.hpp"

namespace urbanfn {

using nlohmann::json;

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "reference\\prediction";
  for (int c = 0; c < counts.cols(); ++c) out << ',' << c;
  out << '\n';
  for (int r = 0; r < counts.rows(); ++r) {
    out << r;
    for (int c = 0; c < counts.cols(); ++c) out << ',' << counts(r, c);
    out << '\n';
  }
  return out.str();
}

namespace {

void require_congruent(const RasterGrid& a, const RasterGrid& b, const char* what) {
  if (!(a.grid() == b.grid()))
    throw DataError(std::string(what) + ": prediction and reference grids differ");
}

int class_code(float v, const char* what) {
  int c = int(v);
  if (float(c) != v || c < 0 || (c >= kNumClasses && c != kUnlabeled))
    throw DataError(std::string(what) + ": value " + std::to_string(v) + " is not a class code");
  return c;
}

}  // namespace

ConfusionMatrix confusion(const RasterGrid& pred, const RasterGrid& ref,
                          const std::optional<std::vector<PixelPoint>>& points) {
  require_congruent(pred, ref, "confusion");
  ConfusionMatrix cm;
  auto tally = [&](int row, int col) {
    int r = class_code(ref(row, col), "confusion reference");
    if (r == kUnlabeled) return;
    int p = class_code(pred(row, col), "confusion prediction");
    if (p == kUnlabeled) throw DataError("confusion: prediction contains the unlabeled sentinel");
    ++cm.counts(r, p);
  };
  if (points) {
    for (const auto& pt : *points) {
      if (pt.row < 0 || pt.col < 0 || pt.row >= ref.height() || pt.col >= ref.width())
        throw DataError("confusion: validation point outside the raster");
      tally(pt.row, pt.col);
    }
  } else {
    for (int row = 0; row < ref.height(); ++row)
      for (int col = 0; col < ref.width(); ++col) tally(row, col);
  }
  return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
  const double total = double(cm.total());
  if (!(total > 0)) throw DataError("classification_metrics: empty confusion matrix");
  const Eigen::VectorXd rows = cm.counts.rowwise().sum().cast<double>();
  const Eigen::VectorXd cols = cm.counts.colwise().sum().transpose().cast<double>();
  const Eigen::VectorXd diag = cm.counts.diagonal().cast<double>();

  ClassificationMetrics m;
  m.oa = diag.sum() / total;
  const double pe = rows.dot(cols) / (total * total);
  if (pe >= 1.0) {
    m.kappa_defined = false;
    m.kappa = std::numeric_limits<double>::quiet_NaN();
  } else {
    m.kappa = (m.oa - pe) / (1.0 - pe);
  }
  m.iou.assign(std::size_t(rows.size()), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index k = 0; k < rows.size(); ++k) {
    const double uni = rows[k] + cols[k] - diag[k];
    if (uni > 0) m.iou[std::size_t(k)] = diag[k] / uni;
    if (rows[k] > 0) m.fwiou += rows[k] / total * m.iou[std::size_t(k)];
  }
  return m;
}

namespace {

void footprint_counts(const RasterGrid& pred, const RasterGrid& ref, FootprintMetrics& m) {
  const auto& p = pred.data();
  const auto& r = ref.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0.0f, b = r[i] != 0.0f;
    m.tp += a && b;
    m.fp += a && !b;
    m.fn += !a && b;
  }
}

void finish_footprint(FootprintMetrics& m) {
  const double tp = double(m.tp), fp = double(m.fp), fn = double(m.fn);
  if (m.tp + m.fp + m.fn == 0) {
    m.empty_union = true;
    m.precision = m.recall = m.f1 = m.iou = 1.0;
    return;
  }
  m.precision = m.tp + m.fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  m.iou = tp / (tp + fp + fn);
}

}  // namespace

FootprintMetrics footprint_metrics(const RasterGrid& pred_fp, const RasterGrid& ref_fp) {
  require_congruent(pred_fp, ref_fp, "footprint_metrics");
  FootprintMetrics m;
  footprint_counts(pred_fp, ref_fp, m);
  finish_footprint(m);
  return m;
}

RasterGrid reference_footprint(const RasterGrid& labels) {
  RasterGrid out(labels.grid(), 1, 0.0f);
  const auto& l = labels.data();
  auto& o = out.data();
  for (std::size_t i = 0; i < l.size(); ++i) {
    int c = class_code(l[i], "reference_footprint");
    o[i] = (is_function(c) || c == kUnlabeled) ? 1.0f : 0.0f;
  }
  out.band_names = {"footprint"};
  return out;
}

BuildingCount count_buildings(const RasterGrid& fp) {
  const int w = fp.width(), h = fp.height();
  std::vector<std::uint8_t> seen(fp.pixels(), 0);
  std::vector<int> stack;
  BuildingCount out;
  std::int64_t foreground = 0;
  for (int start = 0; start < w * h; ++start) {
    if (seen[start] || fp.data()[start] == 0.0f) continue;
    std::int64_t size = 0;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      ++size;
      const int y = i / w, x = i % w;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          const int j = ny * w + nx;
          if (!seen[j] && fp.data()[j] != 0.0f) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
    }
    out.component_pixels.push_back(size);
    foreground += size;
  }
  out.count = std::int64_t(out.component_pixels.size());
  const auto& t = fp.transform();
  out.area_m2 = double(foreground) * std::abs(t.pixel_size_x * t.pixel_size_y);
  return out;
}

GroupMapping default_group_mapping() {
  GroupMapping m{};
  m.fill(-1);
  m[code(FunctionClass::Residential)] = 0;
  m[code(FunctionClass::Commercial)] = 1;
  m[code(FunctionClass::PublicService)] = 2;
  m[code(FunctionClass::PublicHealth)] = 2;
  m[code(FunctionClass::SportArt)] = 2;
  m[code(FunctionClass::Educational)] = 2;
  m[code(FunctionClass::Industrial)] = 3;
  return m;
}

namespace {

void check_mapping(const GroupMapping& m) {
  for (int c = 1; c < kNumClasses; ++c)
    if (m[c] < 0 || m[c] >= kGroups)
      throw DataError("group mapping does not cover class " +
                      std::string(class_name(FunctionClass(c))));
}

}  // namespace

GroupMapping group_mapping_from_json(const std::string& text) {
  GroupMapping m{};
  m.fill(-1);
  try {
    auto j = json::parse(text);
    for (const auto& [cls, group] : j.items()) {
      auto c = class_from_name(cls);
      if (!c || !is_function(code(*c))) throw DataError("group mapping: unknown class " + cls);
      auto g = std::find(kGroupNames.begin(), kGroupNames.end(), group.get<std::string>());
      if (g == kGroupNames.end())
        throw DataError("group mapping: unknown group " + group.get<std::string>());
      m[code(*c)] = int(g - kGroupNames.begin());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("group mapping: ") + e.what());
  }
  check_mapping(m);
  return m;
}

json group_mapping_to_json(const GroupMapping& m) {
  json j = json::object();
  for (int c = 1; c < kNumClasses; ++c)
    if (m[c] >= 0) j[std::string(class_name(FunctionClass(c)))] = kGroupNames[m[c]];
  return j;
}

std::array<double, kGroups> group_proportions(const std::array<double, 7>& props,
                                              const GroupMapping& mapping) {
  check_mapping(mapping);
  std::array<double, kGroups> g{};
  for (int c = 1; c < kNumClasses; ++c) g[mapping[c]] += props[c - 1];
  return g;
}

std::array<double, 7> function_proportions(const std::vector<const RasterGrid*>& maps) {
  std::array<std::int64_t, 7> counts{};
  for (const RasterGrid* m : maps)
    for (float v : m->data()) {
      int c = int(v);
      if (is_function(c) && float(c) == v) ++counts[c - 1];
    }
  const std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t(0));
  if (total == 0) throw DataError("no building pixels in class map");
  std::array<double, 7> props{};
  for (int k = 0; k < 7; ++k) props[k] = double(counts[k]) / double(total);
  return props;
}

StatReport statistical_comparison(const std::vector<const RasterGrid*>& maps,
                                  const std::array<double, kGroups>& reference,
                                  const GroupMapping& mapping) {
  check_mapping(mapping);
  const double sum = std::accumulate(reference.begin(), reference.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-6)
    throw DataError("statistical_comparison: reference proportions sum to " + std::to_string(sum));
  StatReport r;
  r.mapping = mapping;
  r.reference = reference;
  r.predicted = group_proportions(function_proportions(maps), mapping);
  for (int g = 0; g < kGroups; ++g) r.l1_distance += std::abs(r.predicted[g] - r.reference[g]);
  return r;
}

EvalReport evaluate(const std::vector<const RasterGrid*>& preds,
                    const std::vector<const RasterGrid*>& refs,
                    const std::optional<std::vector<std::vector<PixelPoint>>>& points,
                    ConfusionMatrix* cm_out) {
  if (preds.empty() || preds.size() != refs.size())
    throw DataError("evaluate: need matching, non-empty prediction and reference lists");
  if (points && points->size() != preds.size())
    throw DataError("evaluate: point sets must match the number of rasters");
  EvalReport r;
  r.point_based = points.has_value();
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    cm += confusion(*preds[i], *refs[i],
                    points ? std::optional((*points)[i]) : std::nullopt);
    RasterGrid pred_fp = extract_footprint(*preds[i]);
    footprint_counts(pred_fp, reference_footprint(*refs[i]), r.footprint);
    BuildingCount bc = count_buildings(pred_fp);
    r.buildings.count += bc.count;
    r.buildings.area_m2 += bc.area_m2;
    r.buildings.component_pixels.insert(r.buildings.component_pixels.end(),
                                        bc.component_pixels.begin(), bc.component_pixels.end());
  }
  finish_footprint(r.footprint);
  r.classification = classification_metrics(cm);
  r.evaluated_samples = cm.total();
  try {
    auto props = function_proportions(preds);
    r.proportion.assign(props.begin(), props.end());
  } catch (const DataError&) {
    r.proportion.assign(7, 0.0);
  }
  if (cm_out) *cm_out = cm;
  return r;
}

json to_json(const EvalReport& r) {
  json iou = json::object();
  for (int k = 0; k < kNumClasses; ++k) {
    double v = r.classification.iou[std::size_t(k)];
    iou[std::string(class_name(FunctionClass(k)))] = std::isnan(v) ? json(nullptr) : json(v);
  }
  json prop = json::object();
  for (int k = 1; k < kNumClasses; ++k)
    prop[std::string(class_name(FunctionClass(k)))] = r.proportion[std::size_t(k - 1)];
  return {
      {"oa", r.classification.oa},
      {"kappa", r.classification.kappa_defined ? json(r.classification.kappa) : json(nullptr)},
      {"kappa_defined", r.classification.kappa_defined},
      {"fwiou", r.classification.fwiou},
      {"per_class_iou", iou},
      {"proportion", prop},
      {"footprint_precision", r.footprint.precision},
      {"footprint_recall", r.footprint.recall},
      {"footprint_f1", r.footprint.f1},
      {"footprint_iou", r.footprint.iou},
      {"footprint_empty_union", r.footprint.empty_union},
      {"building_count", r.buildings.count},
      {"building_area", r.buildings.area_m2},
      {"evaluated_samples", r.evaluated_samples},
      {"point_based", r.point_based},
  };
}

json to_json(const StatReport& r) {
  json pred = json::object(), ref = json::object();
  for (int g = 0; g < kGroups; ++g) {
    pred[kGroupNames[g]] = r.predicted[g];
    ref[kGroupNames[g]] = r.reference[g];
  }
  return {{"predicted", pred},
          {"reference", ref},
          {"l1_distance", r.l1_distance},
          {"mapping", group_mapping_to_json(r.mapping)}};
}

std::string summary_table(const EvalReport& r) {
  static const char* kRows[] = {"Residential",   "Commercial",  "Public service", "Public health",
                                "Sport and art", "Educational", "Industrial"};
  std::vector<std::pair<std::string, std::string>> right;
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  right.emplace_back("OA", fmt(r.classification.oa));
  right.emplace_back("Kappa", r.classification.kappa_defined ? fmt(r.classification.kappa) : "n/a");
  right.emplace_back("FWIoU", fmt(r.classification.fwiou));
  right.emplace_back("Footprint IoU", fmt(r.footprint.iou));
  right.emplace_back("Footprint F1", fmt(r.footprint.f1));
  right.emplace_back("Building count", std::to_string(r.buildings.count));
  std::snprintf(buf, sizeof buf, "%.6f km2", r.buildings.area_m2 / 1e6);
  right.emplace_back("Building area", buf);

  std::ostringstream out;
  out << "Function type    Proportion | Overall evaluation\n";
  out << "----------------------------+--------------------------------\n";
  for (int k = 0; k < 7; ++k) {
    char line[128];
    std::snprintf(line, sizeof line, "%-16s %9.2f%% | %-16s %s\n", kRows[k],
                  100.0 * r.proportion[std::size_t(k)], right[std::size_t(k)].first.c_str(),
                  right[std::size_t(k)].second.c_str());
    out << line;
  }
  return out.str();
}

std::vector<PixelPoint> sample_validation_points(const RasterGrid& ref, int n, std::uint64_t seed) {
  std::array<std::vector<PixelPoint>, kNumClasses> by_class;
  for (int row = 0; row < ref.height(); ++row)
    for (int col = 0; col < ref.width(); ++col) {
      int c = class_code(ref(row, col), "sample_validation_points");
      if (c != kUnlabeled) by_class[c].push_back({row, col});
    }
  std::vector<int> present;
  for (int c = 0; c < kNumClasses; ++c)
    if (!by_class[c].empty()) present.push_back(c);
  std::vector<PixelPoint> out;
  if (present.empty() || n <= 0) return out;
  Rng rng(seed);
  const int quota = n / int(present.size()), extra = n % int(present.size());
  for (std::size_t i = 0; i < present.size(); ++i) {
    auto& pool = by_class[present[i]];
    const int want = quota + (int(i) < extra ? 1 : 0);
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), want, rng);
  }
  return out;
}

std::string points_to_json(const std::vector<std::vector<PixelPoint>>& points) {
  json sets = json::array();
  for (const auto& set : points) {
    json arr = json::array();
    for (const auto& p : set) arr.push_back({{"row", p.row}, {"col", p.col}});
    sets.push_back(arr);
  }
  return json{{"points", sets}}.dump() + "\n";
}

std::vector<std::vector<PixelPoint>> points_from_json(const std::string& text) {
  try {
    auto j = json::parse(text);
    std::vector<std::vector<PixelPoint>> out;
    const auto& sets = j.at("points");
    // A flat list is a single point set.
    if (!sets.empty() && sets[0].is_object()) {
      out.emplace_back();
      for (const auto& p : sets) out.back().push_back({p.at("row").get<int>(), p.at("col").get<int>()});
      return out;
    }
    for (const auto& set : sets) {
      out.emplace_back();
      for (const auto& p : set) out.back().push_back({p.at("row").get<int>(), p.at("col").get<int>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("points file: ") + e.what());
  }
}

}  // namespace urbanfn
