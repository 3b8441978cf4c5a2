#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "urbanfn/nn/ops.hpp"

namespace urbanfn::nn {

// Named parameter tensors with gradient slots.
template <typename Scalar>
struct ParamSet {
  std::vector<std::string> names;
  std::vector<TensorT<Scalar>> tensors;

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  void zero_grad() {
    for (auto& t : tensors) t.zero_grad();
  }
  template <typename Other>
  ParamSet<Other> cast() const {
    ParamSet<Other> out;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<Other>());
    return out;
  }
};

// Two-branch, single-fusion high-resolution segmentation network.
//
//   stem   : conv3x3 7->16                         (full resolution)
//   high   : 2 x conv3x3 16->16                    (full resolution)
//   low    : conv3x3/2 16->32, 2 x conv3x3 32->32  (half resolution)
//   fuse   : high += up2(conv1x1 32->16 (low)); low += conv3x3/2 16->32 (high)
//   head   : conv1x1 32->8 over [high, up2(conv1x1 32->16 (low))]
//
// The 32->16 projection is shared by both upsampling paths. Every conv except
// the head is followed by a ReLU.
namespace hrnet {

inline constexpr int kInputBands = 7;
inline constexpr int kClasses = 8;
inline constexpr int kHighWidth = 16;
inline constexpr int kLowWidth = 32;

enum Slot : int {
  kStemW, kStemB,
  kHigh1W, kHigh1B,
  kHigh2W, kHigh2B,
  kLow0W, kLow0B,
  kLow1W, kLow1B,
  kLow2W, kLow2B,
  kUpW, kUpB,
  kDownW, kDownB,
  kHeadW, kHeadB,
  kSlotCount
};

struct SlotSpec {
  const char* name;
  Shape shape;
};

inline constexpr std::array<SlotSpec, kSlotCount> kLayout{{
    {"stem.weight", {kHighWidth, kInputBands, 3, 3}},
    {"stem.bias", {1, 1, 1, kHighWidth}},
    {"high1.weight", {kHighWidth, kHighWidth, 3, 3}},
    {"high1.bias", {1, 1, 1, kHighWidth}},
    {"high2.weight", {kHighWidth, kHighWidth, 3, 3}},
    {"high2.bias", {1, 1, 1, kHighWidth}},
    {"low0.weight", {kLowWidth, kHighWidth, 3, 3}},
    {"low0.bias", {1, 1, 1, kLowWidth}},
    {"low1.weight", {kLowWidth, kLowWidth, 3, 3}},
    {"low1.bias", {1, 1, 1, kLowWidth}},
    {"low2.weight", {kLowWidth, kLowWidth, 3, 3}},
    {"low2.bias", {1, 1, 1, kLowWidth}},
    {"fuse_up.weight", {kHighWidth, kLowWidth, 1, 1}},
    {"fuse_up.bias", {1, 1, 1, kHighWidth}},
    {"fuse_down.weight", {kLowWidth, kHighWidth, 3, 3}},
    {"fuse_down.bias", {1, 1, 1, kLowWidth}},
    {"head.weight", {kClasses, 2 * kHighWidth, 1, 1}},
    {"head.bias", {1, 1, 1, kClasses}},
}};

// Stable identifier of the layout, written into checkpoints.
std::string architecture_hash();

// Zero-filled parameters in the fixed layout.
template <typename Scalar>
ParamSet<Scalar> zero_params() {
  ParamSet<Scalar> p;
  for (const auto& s : kLayout) {
    p.names.emplace_back(s.name);
    p.tensors.emplace_back(s.shape);
  }
  return p;
}

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
template <typename Scalar>
ParamSet<Scalar> init_params(std::uint64_t seed) {
  auto p = zero_params<Scalar>();
  std::mt19937_64 rng(seed);
  for (int s = 0; s < kSlotCount; s += 2) {
    auto& w = p.tensors[s];
    const double rf = double(w.h()) * w.w();
    const double limit = std::sqrt(6.0 / (w.c() * rf + w.n() * rf));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values[i] = Scalar(dist(rng));
  }
  return p;
}

// Activations kept for the backward pass.
template <typename Scalar>
struct Cache {
  TensorT<Scalar> x, stem, high1, high2, low0, low1, low2, up_low, fused_high, down, fused_low,
      up_fused, head_in;
};

template <typename Scalar>
void check_input(const ParamSet<Scalar>& p, const TensorT<Scalar>& x) {
  if (p.tensors.size() != kSlotCount) throw DataError("hrnet: parameter set has wrong layout");
  if (x.c() != kInputBands)
    throw DataError("hrnet: expected 7 input bands, got " + std::to_string(x.c()));
  if (x.h() % 2 || x.w() % 2)
    throw DataError("hrnet: input size " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
                    " must be even");
}

template <typename Scalar>
TensorT<Scalar> forward(const ParamSet<Scalar>& p, const TensorT<Scalar>& x,
                        Cache<Scalar>* cache = nullptr) {
  check_input(p, x);
  const auto& t = p.tensors;
  auto conv_relu = [&](const TensorT<Scalar>& in, int w, int stride) {
    auto y = conv2d(in, t[w], t[w + 1], stride);
    relu_inplace(y);
    return y;
  };
  Cache<Scalar> local;
  Cache<Scalar>& c = cache ? *cache : local;
  c.x = x;
  c.stem = conv_relu(x, kStemW, 1);
  c.high1 = conv_relu(c.stem, kHigh1W, 1);
  c.high2 = conv_relu(c.high1, kHigh2W, 1);
  c.low0 = conv_relu(c.stem, kLow0W, 2);
  c.low1 = conv_relu(c.low0, kLow1W, 1);
  c.low2 = conv_relu(c.low1, kLow2W, 1);

  c.up_low = conv_relu(c.low2, kUpW, 1);
  c.fused_high = c.high2;
  c.fused_high.values += bilinear_resize(c.up_low, 2.0).values;
  c.down = conv_relu(c.high2, kDownW, 2);
  c.fused_low = c.low2;
  c.fused_low.values += c.down.values;

  c.up_fused = conv_relu(c.fused_low, kUpW, 1);
  c.head_in = concat_channels(c.fused_high, bilinear_resize(c.up_fused, 2.0));
  return conv2d(c.head_in, t[kHeadW], t[kHeadB], 1);
}

// Accumulates parameter gradients into p and returns dL/dx.
template <typename Scalar>
TensorT<Scalar> backward(ParamSet<Scalar>& p, const Cache<Scalar>& c,
                         const TensorT<Scalar>& dlogits, bool need_dx = false) {
  auto& t = p.tensors;
  auto back = [&](const TensorT<Scalar>& in, int w, int stride, TensorT<Scalar> dy,
                  const TensorT<Scalar>* out, bool dx = true) {
    if (out) relu_backward_inplace(*out, dy);
    return conv2d_backward(in, t[w], t[w + 1], stride, dy, dx);
  };

  auto d_head_in = back(c.head_in, kHeadW, 1, dlogits, nullptr);
  auto [d_fused_high, d_up_fused_big] = split_channels(d_head_in, kHighWidth);
  auto d_up_fused = bilinear_resize_backward(c.up_fused.shape, 2.0, d_up_fused_big);
  auto d_fused_low = back(c.fused_low, kUpW, 1, std::move(d_up_fused), &c.up_fused);

  // fused_low = low2 + down
  auto d_high2 = back(c.high2, kDownW, 2, d_fused_low, &c.down);
  d_high2.values += d_fused_high.values;  // fused_high = high2 + up2(up_low)
  auto d_up_low = bilinear_resize_backward(c.up_low.shape, 2.0, d_fused_high);
  auto d_low2 = back(c.low2, kUpW, 1, std::move(d_up_low), &c.up_low);
  d_low2.values += d_fused_low.values;

  auto d_low1 = back(c.low1, kLow2W, 1, std::move(d_low2), &c.low2);
  auto d_low0 = back(c.low0, kLow1W, 1, std::move(d_low1), &c.low1);
  auto d_stem = back(c.stem, kLow0W, 2, std::move(d_low0), &c.low0);
  auto d_high1 = back(c.high1, kHigh2W, 1, std::move(d_high2), &c.high2);
  d_stem.values += back(c.stem, kHigh1W, 1, std::move(d_high1), &c.high1).values;
  return back(c.x, kStemW, 1, std::move(d_stem), &c.stem, need_dx);
}

}  // namespace hrnet

}  // namespace urbanfn::nn
