#pragma once

// Serial, loop-for-loop reference implementations. They exist to be obviously
// correct and are used as oracles by the tests and as the baseline by bench/.

#include <cstdint>

#include "hma/kernels.hpp"

namespace hma::reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
          int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc);

/// Direct six-nested-loop convolution with zero padding.
template <typename T>
void conv2d_forward(const kernels::ConvGeometry& g, const T* x, const T* w, const T* b, T* y);

}  // namespace hma::reference
