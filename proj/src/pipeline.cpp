#include "urbanfn/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "urbanfn/io.hpp"
#include "urbanfn/nn/loss.hpp"
#include "urbanfn/nn/parallel.hpp"
#include "urbanfn/random.hpp"

namespace urbanfn {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1 || crops_per_tile < 1 || crop_size < 2 || batch_size < 1)
    throw DataError("train config: epochs, crops_per_tile, crop_size and batch_size must be positive");
  if (crop_size % 2) throw DataError("train config: crop_size must be even");
  if (!(adam.lr > 0) || !(adam.eps > 0) || adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 ||
      adam.beta2 >= 1)
    throw DataError("train config: invalid optimizer hyperparameters");
  if (checkpoint_period < 0) throw DataError("train config: checkpoint_period must be >= 0");
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.crops_per_tile = j.value("crops_per_tile", c.crops_per_tile);
    c.crop_size = j.value("crop_size", c.crop_size);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("eps", c.adam.eps);
    c.checkpoint_period = j.value("checkpoint_period", c.checkpoint_period);
  } catch (const json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

json TrainConfig::to_json() const {
  return {{"epochs", epochs},       {"crops_per_tile", crops_per_tile},
          {"crop_size", crop_size}, {"batch_size", batch_size},
          {"seed", seed},           {"lr", adam.lr},
          {"beta1", adam.beta1},    {"beta2", adam.beta2},
          {"eps", adam.eps},        {"checkpoint_period", checkpoint_period}};
}

nn::Tensor crop_tensor(const CropBatch& batch) {
  nn::Tensor x({batch.count(), kCubeBands, batch.size, batch.size});
  std::copy(batch.patches.begin(), batch.patches.end(), x.values.data());
  return x;
}

namespace {

CropBatch select(const CropBatch& all, const std::vector<int>& order, std::size_t begin,
                 std::size_t end) {
  CropBatch b;
  b.size = all.size;
  const std::size_t patch = std::size_t(kCubeBands) * all.size * all.size;
  const std::size_t plane = std::size_t(all.size) * all.size;
  for (std::size_t k = begin; k < end; ++k) {
    const std::size_t i = std::size_t(order[k]);
    b.patches.insert(b.patches.end(), all.patches.begin() + i * patch,
                     all.patches.begin() + (i + 1) * patch);
    b.labels.insert(b.labels.end(), all.labels.begin() + i * plane,
                    all.labels.begin() + (i + 1) * plane);
    b.supervision.insert(b.supervision.end(), all.supervision.begin() + i * plane,
                         all.supervision.begin() + (i + 1) * plane);
    b.tile_ids.push_back(all.tile_ids[i]);
    b.offsets.push_back(all.offsets[i]);
  }
  return b;
}

std::int64_t supervised(const CropBatch& b) {
  return std::accumulate(b.supervision.begin(), b.supervision.end(), std::int64_t(0));
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<TrainTile>& tiles,
                  const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  if (tiles.empty()) throw DataError("train: no training tiles");
  std::int64_t total_supervised = 0;
  for (const auto& t : tiles) {
    check_label_raster(*t.labels);
    for (float g : t.labels->supervision.data()) total_supervised += g != 0.0f;
  }
  if (total_supervised == 0) throw DataError("train: dataset has no supervised pixels");

  TrainResult result;
  auto& ckpt = result.checkpoint;
  ckpt.params = nn::hrnet::init_params<float>(derive_seed(cfg.seed, 0xA11CE));
  ckpt.optimizer = nn::AdamState<float>::zeros(ckpt.params);
  ckpt.meta = {{"train_config", cfg.to_json()}};

  auto save = [&](const std::string& name) {
    if (!out_dir) return;
    ckpt.step = ckpt.optimizer.step;
    nn::write_checkpoint(*out_dir / name, ckpt);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    CropBatch all;
    for (std::size_t t = 0; t < tiles.size(); ++t)
      all.append(sample_crops(*tiles[t].cube, *tiles[t].labels, cfg.crops_per_tile, cfg.crop_size,
                              derive_seed(cfg.seed, std::uint64_t(epoch) + 1, t), tiles[t].tile_id));
    std::vector<int> order(std::size_t(all.count()));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, std::uint64_t(epoch) + 1, 0xFFFFFFFF));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + std::size_t(cfg.batch_size));
      CropBatch batch = select(all, order, begin, end);
      for (int attempt = 0; supervised(batch) == 0; ++attempt) {
        if (attempt == 1000) throw DataError("train: could not draw a batch with supervised pixels");
        CropBatch redraw;
        for (int k = 0; k < batch.count(); ++k) {
          auto it = std::find_if(tiles.begin(), tiles.end(),
                                 [&](const TrainTile& t) { return t.tile_id == batch.tile_ids[k]; });
          redraw.append(sample_crops(*it->cube, *it->labels, 1, cfg.crop_size,
                                     derive_seed(cfg.seed, ckpt.optimizer.step + 1,
                                                 std::uint64_t(attempt) * 1024 + std::uint64_t(k)),
                                     it->tile_id));
        }
        batch = std::move(redraw);
      }

      nn::Tensor x = crop_tensor(batch);
      nn::hrnet::Cache<float> cache;
      nn::Tensor logits = nn::hrnet::forward(ckpt.params, x, &cache);
      nn::Tensor dlogits;
      nn::LossValue loss = nn::masked_ce_loss(logits, std::span<const std::uint8_t>(batch.labels),
                                              std::span<const std::uint8_t>(batch.supervision),
                                              &dlogits);
      ckpt.params.zero_grad();
      nn::hrnet::backward(ckpt.params, cache, dlogits);
      nn::adam_step(ckpt.params, ckpt.optimizer, cfg.adam);
      result.history.push_back({ckpt.optimizer.step, epoch, loss.loss, loss.supervised_pixels});
    }
    if (cfg.checkpoint_period > 0 && (epoch + 1) % cfg.checkpoint_period == 0 &&
        epoch + 1 < cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "checkpoint_epoch_%03d", epoch + 1);
      save(name);
    }
  }
  ckpt.step = ckpt.optimizer.step;
  save("checkpoint_final");
  if (out_dir) write_file_atomic(*out_dir / "loss.csv", loss_history_csv(result.history));
  return result;
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::ostringstream out;
  out << "step,epoch,loss,supervised_pixels\n";
  char buf[64];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%.9g", r.loss);
    out << r.step << ',' << r.epoch << ',' << buf << ',' << r.supervised_pixels << '\n';
  }
  return out.str();
}

std::vector<int> window_starts(int extent, int window, int overlap) {
  if (window < 1 || overlap < 0 || overlap >= window)
    throw DataError("window_starts: need window >= 1 and 0 <= overlap < window");
  if (window >= extent) return {0};
  std::vector<int> starts;
  const int stride = window - overlap;
  for (int s = 0;; s += stride) {
    if (s + window >= extent) {
      starts.push_back(extent - window);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

nn::Tensor infer_logits(const nn::ParamSet<float>& params, const Cube& cube, int window,
                        int overlap) {
  const auto& r = cube.raster;
  if (r.bands() != kCubeBands) throw DataError("infer_tile: cube must have 7 bands");
  if (window < 2 || window % 2) throw DataError("infer_tile: window must be even and >= 2");
  if (overlap < 0 || overlap >= window) throw DataError("infer_tile: overlap must be < window");
  auto effective = [](int extent, int w) {
    int e = std::min(w, extent);
    if (e % 2) --e;
    if (e < 2) throw DataError("infer_tile: tile too small for the network");
    return e;
  };
  const int wh = effective(r.height(), window), ww = effective(r.width(), window);
  const auto rows = window_starts(r.height(), wh, std::min(overlap, wh - 1));
  const auto cols = window_starts(r.width(), ww, std::min(overlap, ww - 1));
  std::vector<std::pair<int, int>> windows;
  for (int y : rows)
    for (int x : cols) windows.emplace_back(y, x);

  const int k = nn::hrnet::kClasses;
  nn::Tensor sum({1, k, r.height(), r.width()});
  std::vector<float> hits(r.pixels(), 0.0f);
  const int chunk = std::max(1, nn::thread_count());
  for (std::size_t first = 0; first < windows.size(); first += std::size_t(chunk)) {
    const std::size_t last = std::min(windows.size(), first + std::size_t(chunk));
    std::vector<nn::Tensor> out(last - first);
    nn::parallel_for(int(last - first), [&](int i) {
      auto [y0, x0] = windows[first + std::size_t(i)];
      nn::Tensor x({1, kCubeBands, wh, ww});
      for (int b = 0; b < kCubeBands; ++b)
        for (int y = 0; y < wh; ++y) {
          auto row = r.band(b).subspan(std::size_t(y0 + y) * r.width() + x0, std::size_t(ww));
          std::copy(row.begin(), row.end(), &x.at(0, b, y, 0));
        }
      out[std::size_t(i)] = nn::hrnet::forward(params, x);
    });
    // merge in window order
    for (std::size_t i = 0; i < out.size(); ++i) {
      auto [y0, x0] = windows[first + i];
      for (int c = 0; c < k; ++c)
        for (int y = 0; y < wh; ++y)
          for (int x = 0; x < ww; ++x) sum.at(0, c, y0 + y, x0 + x) += out[i].at(0, c, y, x);
      for (int y = 0; y < wh; ++y)
        for (int x = 0; x < ww; ++x) hits[std::size_t(y0 + y) * r.width() + x0 + x] += 1.0f;
    }
  }
  for (int c = 0; c < k; ++c)
    for (std::size_t i = 0; i < r.pixels(); ++i) sum.values[Eigen::Index(c * r.pixels() + i)] /= hits[i];
  return sum;
}

RasterGrid argmax_classes(const nn::Tensor& logits, const GridSpec& grid) {
  if (logits.n() != 1 || logits.h() != grid.height || logits.w() != grid.width)
    throw DataError("argmax_classes: logits do not match grid");
  RasterGrid out(grid, 1, 0.0f);
  const std::size_t plane = logits.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    float bv = logits.values[Eigen::Index(i)];
    for (int c = 1; c < logits.c(); ++c) {
      float v = logits.values[Eigen::Index(c * plane + i)];
      if (v > bv) {
        bv = v;
        best = c;
      }
    }
    out.data()[i] = float(best);
  }
  out.band_names = {"class"};
  return out;
}

ClassMapRaster infer_tile(const nn::Checkpoint& ckpt, const Cube& cube, int window, int overlap) {
  return {argmax_classes(infer_logits(ckpt.params, cube, window, overlap), cube.raster.grid()),
          ckpt.id()};
}

RasterGrid extract_footprint(const RasterGrid& class_map) {
  RasterGrid out(class_map.grid(), 1, 0.0f);
  const auto& c = class_map.data();
  for (std::size_t i = 0; i < c.size(); ++i) out.data()[i] = is_function(int(c[i])) && float(int(c[i])) == c[i];
  out.band_names = {"footprint"};
  return out;
}

}  // namespace urbanfn
