#include <algorithm>
#include <cstring>
#include <vector>

#include "hma/kernels.hpp"

namespace hma::kernels {
namespace {

typedef float f32x16 __attribute__((vector_size(64)));
typedef double f64x8 __attribute__((vector_size(64)));

// MR x NR register tile; NR spans two vector registers. KC/MC/NC size the
// packed panels for L1/L2/L3 respectively.
template <typename T>
struct Traits;

template <>
struct Traits<float> {
  using V = f32x16;
  static constexpr int kLanes = 16;
  static constexpr int64_t MR = 12, NR = 32, KC = 256, MC = 120, NC = 3072;
};

template <>
struct Traits<double> {
  using V = f64x8;
  static constexpr int kLanes = 8;
  static constexpr int64_t MR = 12, NR = 16, KC = 256, MC = 96, NC = 2048;
};

// Below this many multiply-adds the packing overhead dominates.
constexpr int64_t kSmallGemm = 24 * 24 * 24;

template <typename T>
void pack_a(bool trans, const T* a, int64_t lda, int64_t i0, int64_t mc, int64_t p0, int64_t kc,
            T* out) {
  constexpr int64_t MR = Traits<T>::MR;
  for (int64_t ip = 0; ip < mc; ip += MR) {
    const int64_t rows = std::min(MR, mc - ip);
    if (trans) {
      for (int64_t p = 0; p < kc; ++p) {
        const T* src = a + (p0 + p) * lda + i0 + ip;
        int64_t r = 0;
        for (; r < rows; ++r) out[r] = src[r];
        for (; r < MR; ++r) out[r] = T(0);
        out += MR;
      }
    } else {
      for (int64_t p = 0; p < kc; ++p) {
        int64_t r = 0;
        for (; r < rows; ++r) out[r] = a[(i0 + ip + r) * lda + p0 + p];
        for (; r < MR; ++r) out[r] = T(0);
        out += MR;
      }
    }
  }
}

template <typename T>
void pack_b(bool trans, const T* b, int64_t ldb, int64_t p0, int64_t kc, int64_t j0, int64_t nc,
            T* out) {
  constexpr int64_t NR = Traits<T>::NR;
  for (int64_t jp = 0; jp < nc; jp += NR) {
    const int64_t cols = std::min(NR, nc - jp);
    if (trans) {
      for (int64_t p = 0; p < kc; ++p) {
        int64_t j = 0;
        for (; j < cols; ++j) out[j] = b[(j0 + jp + j) * ldb + p0 + p];
        for (; j < NR; ++j) out[j] = T(0);
        out += NR;
      }
    } else {
      for (int64_t p = 0; p < kc; ++p) {
        const T* src = b + (p0 + p) * ldb + j0 + jp;
        int64_t j = 0;
        for (; j < cols; ++j) out[j] = src[j];
        for (; j < NR; ++j) out[j] = T(0);
        out += NR;
      }
    }
  }
}

template <typename T>
inline void micro_kernel(int64_t kc, const T* __restrict a, const T* __restrict b,
                         T* __restrict tile) {
  using V = typename Traits<T>::V;
  constexpr int L = Traits<T>::kLanes;
  constexpr int MR = static_cast<int>(Traits<T>::MR);
  V c0[MR], c1[MR];
  for (int r = 0; r < MR; ++r) {
    c0[r] = V{};
    c1[r] = V{};
  }
  for (int64_t p = 0; p < kc; ++p) {
    V b0, b1;
    std::memcpy(&b0, b, sizeof(V));
    std::memcpy(&b1, b + L, sizeof(V));
#pragma GCC unroll 16
    for (int r = 0; r < MR; ++r) {
      const T av = a[r];
      c0[r] += av * b0;
      c1[r] += av * b1;
    }
    a += MR;
    b += 2 * L;
  }
  for (int r = 0; r < MR; ++r) {
    std::memcpy(tile + r * 2 * L, &c0[r], sizeof(V));
    std::memcpy(tile + r * 2 * L + L, &c1[r], sizeof(V));
  }
}

template <typename T>
void scale_c(int64_t m, int64_t n, T beta, T* c, int64_t ldc) {
  if (beta == T(1)) return;
  for (int64_t i = 0; i < m; ++i) {
    T* row = c + i * ldc;
    if (beta == T(0)) {
      std::fill(row, row + n, T(0));
    } else {
      for (int64_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

template <typename T>
void small_gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
                int64_t lda, const T* b, int64_t ldb, T* c, int64_t ldc) {
  if (tb && !ta) {
    for (int64_t i = 0; i < m; ++i) {
      const T* arow = a + i * lda;
      for (int64_t j = 0; j < n; ++j) {
        const T* brow = b + j * ldb;
        T s = T(0);
        for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        c[i * ldc + j] += alpha * s;
      }
    }
    return;
  }
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (int64_t p = 0; p < k; ++p) {
      const T av = alpha * (ta ? a[p * lda + i] : a[i * lda + p]);
      if (tb) {
        for (int64_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <typename T>
void gemm_impl(bool ta, bool tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
               int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc, bool parallel) {
  if (m <= 0 || n <= 0) return;
  scale_c(m, n, beta, c, ldc);
  if (k <= 0 || alpha == T(0)) return;
  if (m * n * k <= kSmallGemm) {
    small_gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, c, ldc);
    return;
  }

  using Tr = Traits<T>;
  constexpr int64_t MR = Tr::MR, NR = Tr::NR, KC = Tr::KC, MC = Tr::MC, NC = Tr::NC;
  thread_local std::vector<T> bpack;

  for (int64_t jc = 0; jc < n; jc += NC) {
    const int64_t nc = std::min(NC, n - jc);
    const int64_t nc_panels = (nc + NR - 1) / NR;
    for (int64_t pc = 0; pc < k; pc += KC) {
      const int64_t kc = std::min(KC, k - pc);
      bpack.resize(static_cast<size_t>(nc_panels * NR * kc));
      pack_b(tb, b, ldb, pc, kc, jc, nc, bpack.data());
      const T* bp = bpack.data();
      const int64_t m_blocks = (m + MC - 1) / MC;

#pragma omp parallel for schedule(static) if (parallel && m_blocks > 1)
      for (int64_t ib = 0; ib < m_blocks; ++ib) {
        thread_local std::vector<T> apack;
        T tile[MR * NR];
        const int64_t ic = ib * MC;
        const int64_t mc = std::min(MC, m - ic);
        const int64_t mc_panels = (mc + MR - 1) / MR;
        apack.resize(static_cast<size_t>(mc_panels * MR * kc));
        pack_a(ta, a, lda, ic, mc, pc, kc, apack.data());
        for (int64_t jp = 0; jp < nc_panels; ++jp) {
          const int64_t cols = std::min(NR, nc - jp * NR);
          for (int64_t ipn = 0; ipn < mc_panels; ++ipn) {
            const int64_t rows = std::min(MR, mc - ipn * MR);
            micro_kernel<T>(kc, apack.data() + ipn * MR * kc, bp + jp * NR * kc, tile);
            T* cblk = c + (ic + ipn * MR) * ldc + jc + jp * NR;
            for (int64_t r = 0; r < rows; ++r) {
              T* crow = cblk + r * ldc;
              const T* trow = tile + r * NR;
              for (int64_t j = 0; j < cols; ++j) crow[j] += alpha * trow[j];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
          int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  gemm_impl(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc, true);
}

template <typename T>
void gemm_batched(bool trans_a, bool trans_b, int64_t batch, int64_t m, int64_t n, int64_t k,
                  T alpha, const T* a, int64_t stride_a, const T* b, int64_t stride_b, T beta, T* c,
                  int64_t stride_c) {
  const int64_t lda = trans_a ? m : k;
  const int64_t ldb = trans_b ? k : n;
#pragma omp parallel for schedule(static) if (batch > 1)
  for (int64_t i = 0; i < batch; ++i) {
    gemm_impl(trans_a, trans_b, m, n, k, alpha, a + i * stride_a, lda, b + i * stride_b, ldb, beta,
              c + i * stride_c, n, false);
  }
}

template void gemm<float>(bool, bool, int64_t, int64_t, int64_t, float, const float*, int64_t,
                          const float*, int64_t, float, float*, int64_t);
template void gemm<double>(bool, bool, int64_t, int64_t, int64_t, double, const double*, int64_t,
                           const double*, int64_t, double, double*, int64_t);
template void gemm_batched<float>(bool, bool, int64_t, int64_t, int64_t, int64_t, float,
                                  const float*, int64_t, const float*, int64_t, float, float*,
                                  int64_t);
template void gemm_batched<double>(bool, bool, int64_t, int64_t, int64_t, int64_t, double,
                                   const double*, int64_t, const double*, int64_t, double, double*,
                                   int64_t);

}  // namespace hma::kernels
