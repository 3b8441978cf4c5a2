#pragma once

#include <Eigen/Core>
#include <array>
#include <cstddef>
#include <string>

#include "urbanfn/error.hpp"

namespace urbanfn::nn {

// [N, C, H, W]; lower-rank tensors pad with leading ones.
using Shape = std::array<int, 4>;

inline std::size_t numel(const Shape& s) {
  return std::size_t(s[0]) * std::size_t(s[1]) * std::size_t(s[2]) * std::size_t(s[3]);
}

inline std::string shape_string(const Shape& s) {
  return "[" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) +
         "," + std::to_string(s[3]) + "]";
}

template <typename Scalar>
struct TensorT {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Shape shape{1, 1, 1, 1};
  Array values = Array::Zero(1);
  Array grad;  // empty until allocated

  TensorT() = default;
  explicit TensorT(const Shape& s, Scalar fill = Scalar(0))
      : shape(s), values(Array::Constant(Eigen::Index(numel(s)), fill)) {
    for (int d : s)
      if (d < 1) throw DataError("tensor dimensions must be positive, got " + shape_string(s));
  }

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }
  std::size_t size() const { return std::size_t(values.size()); }
  std::size_t sample_size() const { return std::size_t(c()) * h() * w(); }
  std::size_t plane() const { return std::size_t(h()) * w(); }

  Scalar* sample(int i) { return values.data() + std::size_t(i) * sample_size(); }
  const Scalar* sample(int i) const { return values.data() + std::size_t(i) * sample_size(); }

  Scalar& at(int i, int ch, int y, int x) {
    return values[Eigen::Index(((std::size_t(i) * c() + ch) * h() + y) * w() + x)];
  }
  Scalar at(int i, int ch, int y, int x) const {
    return values[Eigen::Index(((std::size_t(i) * c() + ch) * h() + y) * w() + x)];
  }

  bool has_grad() const { return grad.size() == values.size(); }
  void zero_grad() { grad.setZero(values.size()); }

  template <typename Other>
  TensorT<Other> cast() const {
    TensorT<Other> out;
    out.shape = shape;
    out.values = values.template cast<Other>();
    if (has_grad()) out.grad = grad.template cast<Other>();
    return out;
  }
};

using Tensor = TensorT<float>;

}  // namespace urbanfn::nn
