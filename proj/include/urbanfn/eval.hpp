#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "urbanfn/labelgen.hpp"
#include "urbanfn/raster.hpp"

namespace urbanfn {

// Rows are reference classes, columns predictions.
struct ConfusionMatrix {
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
  Counts counts = Counts::Zero(kNumClasses, kNumClasses);

  std::int64_t total() const { return counts.sum(); }
  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    counts += o.counts;
    return *this;
  }
  std::string to_csv() const;
};

struct PixelPoint {
  int row;
  int col;
  bool operator==(const PixelPoint&) const = default;
};

// Tallies (reference, prediction) pairs, either over every pixel or only at
// `points`. Reference pixels equal to 255 are skipped.
ConfusionMatrix confusion(const RasterGrid& pred, const RasterGrid& ref,
                          const std::optional<std::vector<PixelPoint>>& points = std::nullopt);

struct ClassificationMetrics {
  double oa = 0.0;
  double kappa = 0.0;
  bool kappa_defined = true;  // false when chance agreement is 1
  double fwiou = 0.0;
  std::vector<double> iou;  // NaN for classes absent from both sides
};

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

struct FootprintMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  bool empty_union = false;  // both masks empty; f1 and iou set to 1
  std::int64_t tp = 0, fp = 0, fn = 0;
};

// Pixelwise comparison of two binary (nonzero = building) masks.
FootprintMetrics footprint_metrics(const RasterGrid& pred_fp, const RasterGrid& ref_fp);

// Building indicator of a reference label raster: classes 1..7 and 255.
RasterGrid reference_footprint(const RasterGrid& labels);

struct BuildingCount {
  std::int64_t count = 0;
  double area_m2 = 0.0;
  std::vector<std::int64_t> component_pixels;  // in raster scan order of first pixel
};

// 8-connected components of nonzero pixels.
BuildingCount count_buildings(const RasterGrid& fp);

// Class k (1..7) -> group index in [0, 4).
using GroupMapping = std::array<int, kNumClasses>;
inline constexpr int kGroups = 4;
inline const std::array<std::string, kGroups> kGroupNames = {"Residential", "Commercial",
                                                             "PublicFacilities", "Industrial"};
GroupMapping default_group_mapping();
GroupMapping group_mapping_from_json(const std::string& text);
nlohmann::json group_mapping_to_json(const GroupMapping& m);

struct StatReport {
  std::array<double, kGroups> predicted{};
  std::array<double, kGroups> reference{};
  double l1_distance = 0.0;
  GroupMapping mapping{};
};

// Aggregates 7 function proportions into the 4 groups.
std::array<double, kGroups> group_proportions(const std::array<double, 7>& function_props,
                                              const GroupMapping& mapping);

// Area shares of classes 1..7 among building pixels of the class maps.
std::array<double, 7> function_proportions(const std::vector<const RasterGrid*>& class_maps);

StatReport statistical_comparison(const std::vector<const RasterGrid*>& class_maps,
                                  const std::array<double, kGroups>& reference,
                                  const GroupMapping& mapping);

struct EvalReport {
  ClassificationMetrics classification;
  std::vector<double> proportion;  // predicted area share per function class 1..7
  FootprintMetrics footprint;
  BuildingCount buildings;
  std::int64_t evaluated_samples = 0;
  bool point_based = false;
};

// Evaluates predicted class maps against reference label rasters (pairwise).
// Points, when given, index into the pair with the same position.
EvalReport evaluate(const std::vector<const RasterGrid*>& preds,
                    const std::vector<const RasterGrid*>& refs,
                    const std::optional<std::vector<std::vector<PixelPoint>>>& points,
                    ConfusionMatrix* cm_out = nullptr);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const StatReport& r);

// Fixed-width summary in the shape of the usual overall-evaluation table.
std::string summary_table(const EvalReport& r);

// Equal quota of points per reference class present (255 excluded), drawn
// uniformly without replacement within each class.
std::vector<PixelPoint> sample_validation_points(const RasterGrid& ref, int n, std::uint64_t seed);

std::string points_to_json(const std::vector<std::vector<PixelPoint>>& points);
std::vector<std::vector<PixelPoint>> points_from_json(const std::string& text);

}  // namespace urbanfn
