#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "urbanfn/nn/parallel.hpp"
#include "urbanfn/nn/tensor.hpp"

namespace urbanfn::nn {

namespace detail {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline int conv_out(int in, int stride) { return (in + stride - 1) / stride; }

struct ConvGeom {
  int cin, h, w, k, stride, pad, ho, wo;
  bool direct() const { return k == 1 && stride == 1; }
};

template <typename Scalar>
ConvGeom check_conv(const TensorT<Scalar>& x, const TensorT<Scalar>& weight,
                    const TensorT<Scalar>& bias, int stride) {
  const int k = weight.h();
  if (weight.w() != k || (k != 1 && k != 3))
    throw DataError("conv2d: kernel must be 1x1 or 3x3, got " + shape_string(weight.shape));
  if (weight.c() != x.c())
    throw DataError("conv2d: input has " + std::to_string(x.c()) + " channels, kernel expects " +
                    std::to_string(weight.c()));
  if (int(bias.size()) != weight.n()) throw DataError("conv2d: bias length mismatch");
  if (stride != 1 && stride != 2) throw DataError("conv2d: stride must be 1 or 2");
  return {x.c(), x.h(), x.w(), k, stride, k / 2, conv_out(x.h(), stride), conv_out(x.w(), stride)};
}

// col(ci*k*k + ky*k + kx, oy*wo + ox) = x(ci, oy*s + ky - pad, ox*s + kx - pad), zero outside.
template <typename Scalar>
void im2col(const Scalar* x, const ConvGeom& g, RowMat<Scalar>& col) {
  col.resize(Eigen::Index(g.cin) * g.k * g.k, Eigen::Index(g.ho) * g.wo);
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        Scalar* dst = col.data() + (Eigen::Index(ci * g.k + ky) * g.k + kx) * col.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          int iy = oy * g.stride + ky - g.pad;
          Scalar* d = dst + Eigen::Index(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill(d, d + g.wo, Scalar(0));
            continue;
          }
          const Scalar* src = x + (std::size_t(ci) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            int ix = ox * g.stride + kx - g.pad;
            d[ox] = (ix < 0 || ix >= g.w) ? Scalar(0) : src[ix];
          }
        }
      }
}

template <typename Scalar>
void col2im_add(const RowMat<Scalar>& col, const ConvGeom& g, Scalar* dx) {
  for (int ci = 0; ci < g.cin; ++ci)
    for (int ky = 0; ky < g.k; ++ky)
      for (int kx = 0; kx < g.k; ++kx) {
        const Scalar* src = col.data() + (Eigen::Index(ci * g.k + ky) * g.k + kx) * col.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          int iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const Scalar* s = src + Eigen::Index(oy) * g.wo;
          Scalar* d = dx + (std::size_t(ci) * g.h + iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            int ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) d[ix] += s[ox];
          }
        }
      }
}

}  // namespace detail

// Cross-correlation with zero "same" padding. weight is [Cout, Cin, k, k]
// with k in {1, 3}; bias has Cout entries. Stride-2 output is ceil(H/2) x ceil(W/2).
template <typename Scalar>
TensorT<Scalar> conv2d(const TensorT<Scalar>& x, const TensorT<Scalar>& weight,
                       const TensorT<Scalar>& bias, int stride) {
  using namespace detail;
  const ConvGeom g = check_conv(x, weight, bias, stride);
  const int cout = weight.n();
  TensorT<Scalar> y({x.n(), cout, g.ho, g.wo});
  Eigen::Map<const RowMat<Scalar>> wm(weight.values.data(), cout, Eigen::Index(g.cin) * g.k * g.k);
  Eigen::Map<const Vec<Scalar>> bv(bias.values.data(), cout);
  parallel_for(x.n(), [&](int n) {
    Eigen::Map<RowMat<Scalar>> ym(y.sample(n), cout, Eigen::Index(g.ho) * g.wo);
    if (g.direct()) {
      Eigen::Map<const RowMat<Scalar>> xm(x.sample(n), g.cin, Eigen::Index(g.h) * g.w);
      ym.noalias() = wm * xm;
    } else {
      RowMat<Scalar> col;
      im2col(x.sample(n), g, col);
      ym.noalias() = wm * col;
    }
    ym.colwise() += bv;
  });
  return y;
}

// Accumulates weight/bias gradients into weight.grad / bias.grad (allocated
// on first use) and returns dL/dx. Per-sample contributions are summed in
// sample order regardless of the thread count.
template <typename Scalar>
TensorT<Scalar> conv2d_backward(const TensorT<Scalar>& x, TensorT<Scalar>& weight,
                                TensorT<Scalar>& bias, int stride, const TensorT<Scalar>& dy,
                                bool need_dx = true) {
  using namespace detail;
  const ConvGeom g = check_conv(x, weight, bias, stride);
  const int cout = weight.n();
  const Eigen::Index kk = Eigen::Index(g.cin) * g.k * g.k;
  if (dy.n() != x.n() || dy.c() != cout || dy.h() != g.ho || dy.w() != g.wo)
    throw DataError("conv2d_backward: upstream gradient shape " + shape_string(dy.shape));
  if (!weight.has_grad()) weight.zero_grad();
  if (!bias.has_grad()) bias.zero_grad();

  TensorT<Scalar> dx;
  if (need_dx) dx = TensorT<Scalar>(x.shape);
  Eigen::Map<const RowMat<Scalar>> wm(weight.values.data(), cout, kk);
  std::vector<RowMat<Scalar>> dw(static_cast<std::size_t>(x.n()));
  std::vector<Vec<Scalar>> db(static_cast<std::size_t>(x.n()));

  parallel_for(x.n(), [&](int n) {
    Eigen::Map<const RowMat<Scalar>> dym(dy.sample(n), cout, Eigen::Index(g.ho) * g.wo);
    db[n] = dym.rowwise().sum();
    if (g.direct()) {
      Eigen::Map<const RowMat<Scalar>> xm(x.sample(n), g.cin, Eigen::Index(g.h) * g.w);
      dw[n].noalias() = dym * xm.transpose();
      if (need_dx) {
        Eigen::Map<RowMat<Scalar>> dxm(dx.sample(n), g.cin, Eigen::Index(g.h) * g.w);
        dxm.noalias() = wm.transpose() * dym;
      }
    } else {
      RowMat<Scalar> col;
      im2col(x.sample(n), g, col);
      dw[n].noalias() = dym * col.transpose();
      if (need_dx) {
        RowMat<Scalar> dcol = wm.transpose() * dym;
        col2im_add(dcol, g, dx.sample(n));
      }
    }
  });

  Eigen::Map<RowMat<Scalar>> gw(weight.grad.data(), cout, kk);
  Eigen::Map<Vec<Scalar>> gb(bias.grad.data(), cout);
  for (int n = 0; n < x.n(); ++n) {
    gw += dw[n];
    gb += db[n];
  }
  return dx;
}

template <typename Scalar>
void relu_inplace(TensorT<Scalar>& x) {
  x.values = x.values.max(Scalar(0));
}

// Gradient through a ReLU given its output.
template <typename Scalar>
void relu_backward_inplace(const TensorT<Scalar>& out, TensorT<Scalar>& dy) {
  dy.values = (out.values > Scalar(0)).select(dy.values, Scalar(0));
}

namespace detail {

struct AxisTap {
  int i0, i1;
  double w0, w1;
};

// Half-pixel (align_corners = false) source taps for one axis.
inline std::vector<AxisTap> resize_taps(int in, int out) {
  std::vector<AxisTap> taps(static_cast<std::size_t>(out));
  const double scale = double(in) / double(out);
  for (int o = 0; o < out; ++o) {
    double src = std::max(0.0, scale * (o + 0.5) - 0.5);
    int i0 = std::min(int(std::floor(src)), in - 1);
    int i1 = std::min(i0 + 1, in - 1);
    double f = src - i0;
    taps[o] = {i0, i1, 1.0 - f, f};
  }
  return taps;
}

inline void check_resize(int h, int w, double scale) {
  if (scale == 0.5) {
    if (h % 2 || w % 2) throw DataError("bilinear_resize: downscale needs even height and width");
  } else if (scale != 2.0) {
    throw DataError("bilinear_resize: scale must be 0.5 or 2.0");
  }
}

inline int resized(int d, double scale) { return scale == 2.0 ? d * 2 : d / 2; }

}  // namespace detail

template <typename Scalar>
TensorT<Scalar> bilinear_resize(const TensorT<Scalar>& x, double scale) {
  using namespace detail;
  check_resize(x.h(), x.w(), scale);
  const int ho = resized(x.h(), scale), wo = resized(x.w(), scale);
  auto ty = resize_taps(x.h(), ho), tx = resize_taps(x.w(), wo);
  TensorT<Scalar> y({x.n(), x.c(), ho, wo});
  const int planes = x.n() * x.c();
  for (int p = 0; p < planes; ++p) {
    const Scalar* src = x.values.data() + std::size_t(p) * x.plane();
    Scalar* dst = y.values.data() + std::size_t(p) * y.plane();
    for (int oy = 0; oy < ho; ++oy) {
      const AxisTap& a = ty[oy];
      const Scalar* r0 = src + std::size_t(a.i0) * x.w();
      const Scalar* r1 = src + std::size_t(a.i1) * x.w();
      for (int ox = 0; ox < wo; ++ox) {
        const AxisTap& b = tx[ox];
        Scalar top = Scalar(b.w0) * r0[b.i0] + Scalar(b.w1) * r0[b.i1];
        Scalar bot = Scalar(b.w0) * r1[b.i0] + Scalar(b.w1) * r1[b.i1];
        dst[std::size_t(oy) * wo + ox] = Scalar(a.w0) * top + Scalar(a.w1) * bot;
      }
    }
  }
  return y;
}

// Adjoint of bilinear_resize: scatters dy back with the forward weights.
template <typename Scalar>
TensorT<Scalar> bilinear_resize_backward(const Shape& input_shape, double scale,
                                         const TensorT<Scalar>& dy) {
  using namespace detail;
  const int h = input_shape[2], w = input_shape[3];
  check_resize(h, w, scale);
  const int ho = resized(h, scale), wo = resized(w, scale);
  if (dy.h() != ho || dy.w() != wo || dy.c() != input_shape[1] || dy.n() != input_shape[0])
    throw DataError("bilinear_resize_backward: gradient shape mismatch");
  auto ty = resize_taps(h, ho), tx = resize_taps(w, wo);
  TensorT<Scalar> dx(input_shape);
  const int planes = input_shape[0] * input_shape[1];
  for (int p = 0; p < planes; ++p) {
    const Scalar* g = dy.values.data() + std::size_t(p) * dy.plane();
    Scalar* d = dx.values.data() + std::size_t(p) * dx.plane();
    for (int oy = 0; oy < ho; ++oy) {
      const AxisTap& a = ty[oy];
      Scalar* r0 = d + std::size_t(a.i0) * w;
      Scalar* r1 = d + std::size_t(a.i1) * w;
      for (int ox = 0; ox < wo; ++ox) {
        const AxisTap& b = tx[ox];
        Scalar v = g[std::size_t(oy) * wo + ox];
        Scalar top = Scalar(a.w0) * v, bot = Scalar(a.w1) * v;
        r0[b.i0] += Scalar(b.w0) * top;
        r0[b.i1] += Scalar(b.w1) * top;
        r1[b.i0] += Scalar(b.w0) * bot;
        r1[b.i1] += Scalar(b.w1) * bot;
      }
    }
  }
  return dx;
}

// Channel concatenation of two tensors with equal N, H, W.
template <typename Scalar>
TensorT<Scalar> concat_channels(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw DataError("concat_channels: shape mismatch");
  TensorT<Scalar> out({a.n(), a.c() + b.c(), a.h(), a.w()});
  for (int n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + a.sample_size(), out.sample(n));
    std::copy(b.sample(n), b.sample(n) + b.sample_size(), out.sample(n) + a.sample_size());
  }
  return out;
}

template <typename Scalar>
std::pair<TensorT<Scalar>, TensorT<Scalar>> split_channels(const TensorT<Scalar>& x, int first) {
  TensorT<Scalar> a({x.n(), first, x.h(), x.w()}), b({x.n(), x.c() - first, x.h(), x.w()});
  for (int n = 0; n < x.n(); ++n) {
    std::copy(x.sample(n), x.sample(n) + a.sample_size(), a.sample(n));
    std::copy(x.sample(n) + a.sample_size(), x.sample(n) + x.sample_size(), b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace urbanfn::nn
