#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "urbanfn/nn/tensor.hpp"

namespace urbanfn::nn {

struct LossValue {
  double loss = 0.0;
  std::int64_t supervised_pixels = 0;
};

// Masked cross-entropy over [N, K, H, W] logits:
//
//   loss = -sum_{g=1} log softmax(logits)[label] / #{g = 1}
//
// Pixels with supervision 0 are skipped entirely: they add nothing to the loss
// and get an exactly zero gradient. When `dlogits` is given it receives
// g * (softmax - onehot) / #{g = 1}.
template <typename Scalar>
LossValue masked_ce_loss(const TensorT<Scalar>& logits, std::span<const std::uint8_t> labels,
                         std::span<const std::uint8_t> supervision,
                         TensorT<Scalar>* dlogits = nullptr) {
  const int n = logits.n(), k = logits.c();
  const std::size_t plane = logits.plane();
  if (labels.size() != std::size_t(n) * plane || supervision.size() != labels.size())
    throw DataError("masked_ce_loss: labels/supervision size does not match logits");

  std::int64_t count = 0;
  for (std::size_t i = 0; i < supervision.size(); ++i) {
    if (supervision[i] > 1) throw DataError("masked_ce_loss: supervision must be 0 or 1");
    if (supervision[i] == 1) {
      if (labels[i] >= k)
        throw DataError("masked_ce_loss: supervised label " + std::to_string(labels[i]) +
                        " outside 0.." + std::to_string(k - 1));
      ++count;
    }
  }
  if (count == 0) throw DataError("no supervised pixels in batch");

  if (dlogits) *dlogits = TensorT<Scalar>(logits.shape);
  const double inv = 1.0 / double(count);
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    const Scalar* z = logits.sample(s);
    for (std::size_t px = 0; px < plane; ++px) {
      const std::size_t i = std::size_t(s) * plane + px;
      if (supervision[i] == 0) continue;
      double zmax = double(z[px]);
      for (int c = 1; c < k; ++c) zmax = std::max(zmax, double(z[c * plane + px]));
      double sum = 0.0;
      for (int c = 0; c < k; ++c) sum += std::exp(double(z[c * plane + px]) - zmax);
      const double lse = zmax + std::log(sum);
      total += lse - double(z[labels[i] * plane + px]);
      if (dlogits) {
        Scalar* d = dlogits->sample(s);
        for (int c = 0; c < k; ++c) {
          double prob = std::exp(double(z[c * plane + px]) - lse);
          d[c * plane + px] = Scalar((prob - (c == labels[i] ? 1.0 : 0.0)) * inv);
        }
      }
    }
  }
  return {total * inv, count};
}

// Per-pixel softmax along the channel axis.
template <typename Scalar>
TensorT<Scalar> softmax(const TensorT<Scalar>& logits) {
  TensorT<Scalar> out(logits.shape);
  const std::size_t plane = logits.plane();
  for (int s = 0; s < logits.n(); ++s)
    for (std::size_t px = 0; px < plane; ++px) {
      const Scalar* z = logits.sample(s);
      double zmax = double(z[px]);
      for (int c = 1; c < logits.c(); ++c) zmax = std::max(zmax, double(z[c * plane + px]));
      double sum = 0.0;
      for (int c = 0; c < logits.c(); ++c) sum += std::exp(double(z[c * plane + px]) - zmax);
      for (int c = 0; c < logits.c(); ++c)
        out.sample(s)[c * plane + px] = Scalar(std::exp(double(z[c * plane + px]) - zmax) / sum);
    }
  return out;
}

}  // namespace urbanfn::nn
