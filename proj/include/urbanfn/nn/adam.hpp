#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "urbanfn/nn/hrnet.hpp"

namespace urbanfn::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::int64_t step = 0;
  std::vector<typename TensorT<Scalar>::Array> m, v;

  static AdamState zeros(const ParamSet<Scalar>& p) {
    AdamState s;
    for (const auto& t : p.tensors) {
      s.m.push_back(TensorT<Scalar>::Array::Zero(t.values.size()));
      s.v.push_back(TensorT<Scalar>::Array::Zero(t.values.size()));
    }
    return s;
  }
};

// Bias-corrected Adam update using the gradients stored in `p`.
template <typename Scalar>
void adam_step(ParamSet<Scalar>& p, AdamState<Scalar>& s, const AdamConfig& cfg) {
  if (s.m.size() != p.tensors.size()) s = AdamState<Scalar>::zeros(p);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const auto& t = p.tensors[i];
    if (!t.has_grad()) throw DataError("adam_step: parameter " + p.names[i] + " has no gradient");
    if (!t.grad.isFinite().all())
      throw DataError("adam_step: non-finite gradient in parameter " + p.names[i]);
  }
  ++s.step;
  const Scalar b1(cfg.beta1), b2(cfg.beta2);
  const Scalar c1 = Scalar(1.0 - std::pow(cfg.beta1, double(s.step)));
  const Scalar c2 = Scalar(1.0 - std::pow(cfg.beta2, double(s.step)));
  const Scalar lr(cfg.lr), eps(cfg.eps);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    auto& t = p.tensors[i];
    s.m[i] = b1 * s.m[i] + (Scalar(1) - b1) * t.grad;
    s.v[i] = b2 * s.v[i] + (Scalar(1) - b2) * t.grad.square();
    t.values -= lr * (s.m[i] / c1) / ((s.v[i] / c2).sqrt() + eps);
  }
}

}  // namespace urbanfn::nn
