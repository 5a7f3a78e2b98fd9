#include <algorithm>
#include <vector>

#include "hma/kernels.hpp"

namespace hma::kernels {
namespace {

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad == 0;
}

// col has (C * kH * kW) rows and (Ho * Wo) columns.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const int64_t ho = g.out_h(), wo = g.out_w();
  const int64_t rows = g.in_channels * g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static) if (rows * ho * wo > 65536)
  for (int64_t row = 0; row < rows; ++row) {
    const int64_t kx = row % g.kernel_w;
    const int64_t ky = (row / g.kernel_w) % g.kernel_h;
    const int64_t c = row / (g.kernel_w * g.kernel_h);
    const T* plane = x + c * g.height * g.width;
    T* dst = col + row * ho * wo;
    for (int64_t oy = 0; oy < ho; ++oy) {
      const int64_t iy = oy * g.stride - g.pad + ky;
      T* drow = dst + oy * wo;
      if (iy < 0 || iy >= g.height) {
        std::fill(drow, drow + wo, T(0));
        continue;
      }
      const T* srow = plane + iy * g.width;
      for (int64_t ox = 0; ox < wo; ++ox) {
        const int64_t ix = ox * g.stride - g.pad + kx;
        drow[ox] = (ix >= 0 && ix < g.width) ? srow[ix] : T(0);
      }
    }
  }
}

// Scatter-add of col back into the image; parallel over input channels so
// no two threads touch the same plane.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* x) {
  const int64_t ho = g.out_h(), wo = g.out_w();
  const int64_t khw = g.kernel_h * g.kernel_w;
#pragma omp parallel for schedule(static) if (g.in_channels * khw * ho * wo > 65536)
  for (int64_t c = 0; c < g.in_channels; ++c) {
    T* plane = x + c * g.height * g.width;
    for (int64_t kk = 0; kk < khw; ++kk) {
      const int64_t ky = kk / g.kernel_w, kx = kk % g.kernel_w;
      const T* src = col + (c * khw + kk) * ho * wo;
      for (int64_t oy = 0; oy < ho; ++oy) {
        const int64_t iy = oy * g.stride - g.pad + ky;
        if (iy < 0 || iy >= g.height) continue;
        T* drow = plane + iy * g.width;
        const T* srow = src + oy * wo;
        for (int64_t ox = 0; ox < wo; ++ox) {
          const int64_t ix = ox * g.stride - g.pad + kx;
          if (ix >= 0 && ix < g.width) drow[ix] += srow[ox];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y) {
  const int64_t ho = g.out_h(), wo = g.out_w();
  const int64_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const int64_t in_size = g.in_channels * g.height * g.width;
  const int64_t out_size = g.out_channels * ho * wo;
  std::vector<T> col;
  if (!is_pointwise(g)) col.resize(static_cast<size_t>(kdim * ho * wo));
  for (int64_t n = 0; n < g.batch; ++n) {
    const T* xn = x + n * in_size;
    T* yn = y + n * out_size;
    const T* src = xn;
    if (!is_pointwise(g)) {
      im2col(g, xn, col.data());
      src = col.data();
    }
    if (b) {
      for (int64_t o = 0; o < g.out_channels; ++o) std::fill(yn + o * ho * wo, yn + (o + 1) * ho * wo, b[o]);
    }
    gemm(false, false, g.out_channels, ho * wo, kdim, T(1), w, kdim, src, ho * wo, b ? T(1) : T(0), yn, ho * wo);
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* gy, T* gx, T* gw,
                     T* gb) {
  const int64_t ho = g.out_h(), wo = g.out_w();
  const int64_t kdim = g.in_channels * g.kernel_h * g.kernel_w;
  const int64_t in_size = g.in_channels * g.height * g.width;
  const int64_t out_size = g.out_channels * ho * wo;
  const bool pointwise = is_pointwise(g);
  std::vector<T> col, gcol;
  if (!pointwise) {
    col.resize(static_cast<size_t>(kdim * ho * wo));
    if (gx) gcol.resize(col.size());
  }
  for (int64_t n = 0; n < g.batch; ++n) {
    const T* xn = x + n * in_size;
    const T* gyn = gy + n * out_size;
    if (gb) {
      for (int64_t o = 0; o < g.out_channels; ++o) {
        const T* row = gyn + o * ho * wo;
        T s = T(0);
        for (int64_t i = 0; i < ho * wo; ++i) s += row[i];
        gb[o] += s;
      }
    }
    if (gw) {
      const T* src = xn;
      if (!pointwise) {
        im2col(g, xn, col.data());
        src = col.data();
      }
      gemm(false, true, g.out_channels, kdim, ho * wo, T(1), gyn, ho * wo, src, ho * wo, T(1), gw, kdim);
    }
    if (gx) {
      T* gxn = gx + n * in_size;
      if (pointwise) {
        gemm(true, false, kdim, ho * wo, g.out_channels, T(1), w, kdim, gyn, ho * wo, T(1), gxn, ho * wo);
      } else {
        gemm(true, false, kdim, ho * wo, g.out_channels, T(1), w, kdim, gyn, ho * wo, T(0), gcol.data(), ho * wo);
        col2im(g, gcol.data(), gxn);
      }
    }
  }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*, float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*, double*, double*, double*);

}  // namespace hma::kernels
