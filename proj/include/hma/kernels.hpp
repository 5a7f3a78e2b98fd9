#pragma once

// OpenMP-parallel compute kernels. Every kernel here has a naive serial
// counterpart in reference.hpp; tests compare the two and bench/ times them.
// Results do not depend on the thread count: each output element is reduced
// by exactly one thread in a fixed order.

#include <cstdint>

namespace hma::kernels {

/// C = alpha * op(A) * op(B) + beta * C, row-major. op(A) is m x k, op(B) is k x n.
/// beta == 0 overwrites C without reading it.
template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
          int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc);

/// Independent GEMMs over `batch` matrices laid out at fixed strides; the
/// batch loop is the parallel axis.
template <typename T>
void gemm_batched(bool trans_a, bool trans_b, int64_t batch, int64_t m, int64_t n, int64_t k,
                  T alpha, const T* a, int64_t stride_a, const T* b, int64_t stride_b, T beta, T* c,
                  int64_t stride_c);

struct ConvGeometry {
  int64_t batch, in_channels, height, width;
  int64_t out_channels, kernel_h, kernel_w;
  int64_t stride, pad;

  int64_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  int64_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
};

/// x: N x C x H x W, w: O x C x kH x kW, b: O (may be null), y: N x O x Ho x Wo.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* b, T* y);

/// Accumulates into gx, gw, gb; any of them may be null when not needed.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* gy, T* gx, T* gw,
                     T* gb);

}  // namespace hma::kernels
