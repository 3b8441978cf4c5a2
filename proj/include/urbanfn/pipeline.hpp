#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "urbanfn/cube.hpp"
#include "urbanfn/labelgen.hpp"
#include "urbanfn/nn/checkpoint.hpp"

namespace urbanfn {

struct TrainConfig {
  int epochs = 10;
  int crops_per_tile = 40;
  int crop_size = 64;
  int batch_size = 8;
  std::uint64_t seed = 7;
  nn::AdamConfig adam{3e-3};
  int checkpoint_period = 0;  // epochs between periodic checkpoints; 0 = final only

  void validate() const;
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TrainTile {
  const Cube* cube;
  const LabelRaster* labels;
  int tile_id = 0;
};

struct LossRecord {
  std::int64_t step;
  int epoch;
  double loss;
  std::int64_t supervised_pixels;
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<LossRecord> history;
};

// Every epoch samples `crops_per_tile` crops from each tile, shuffles them and
// minimizes the masked cross-entropy batch by batch. Batches without any
// supervised pixel are redrawn. With `out_dir`, periodic and final
// checkpoints plus loss.csv are written there.
TrainResult train(const TrainConfig& cfg, const std::vector<TrainTile>& tiles,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string loss_history_csv(const std::vector<LossRecord>& history);

// Per-pixel class codes 0..7.
struct ClassMapRaster {
  RasterGrid raster;
  std::string provenance;  // checkpoint id
};

// Window start offsets covering [0, extent); the last window is clamped inside.
std::vector<int> window_starts(int extent, int window, int overlap);

// Sliding-window inference: logits of overlapping windows are averaged per
// pixel (accumulated in window order), then argmax with ties to the lower code.
ClassMapRaster infer_tile(const nn::Checkpoint& ckpt, const Cube& cube, int window, int overlap);

// Raw averaged logits [1, 8, H, W] behind infer_tile.
nn::Tensor infer_logits(const nn::ParamSet<float>& params, const Cube& cube, int window,
                        int overlap);

// Argmax over the channel axis; the first maximum wins.
RasterGrid argmax_classes(const nn::Tensor& logits, const GridSpec& grid);

// 1 where the class is a building function (1..7), else 0.
RasterGrid extract_footprint(const RasterGrid& class_map);

// Cube patch tensor [N, 7, S, S] for a crop batch.
nn::Tensor crop_tensor(const CropBatch& batch);

}  // namespace urbanfn
