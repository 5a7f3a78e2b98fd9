#include "hma/ag_ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "hma/kernels.hpp"

namespace hma {

IndexMap cached_index(const std::string& key, const std::function<std::vector<int64_t>()>& build) {
  static std::mutex mu;
  static std::map<std::string, IndexMap> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const std::vector<int64_t>>(build());
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(built)).first->second;
}

Shape permute_shape(const Shape& in, const std::vector<int>& perm) {
  if (perm.size() != in.size()) throw ShapeError("permutation rank mismatch for " + to_string(in));
  Shape out(in.size());
  for (size_t i = 0; i < perm.size(); ++i) out[i] = in[static_cast<size_t>(perm[i])];
  return out;
}

IndexMap permute_index(const Shape& in, const std::vector<int>& perm) {
  std::string key = "perm" + to_string(in);
  for (int p : perm) key += "," + std::to_string(p);
  return cached_index(key, [&] {
    const Shape out = permute_shape(in, perm);
    const size_t r = in.size();
    std::vector<int64_t> in_stride(r, 1);
    for (size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
    std::vector<int64_t> step(r);
    for (size_t i = 0; i < r; ++i) step[i] = in_stride[static_cast<size_t>(perm[i])];
    std::vector<int64_t> idx(static_cast<size_t>(numel(out)));
    std::vector<int64_t> counter(r, 0);
    int64_t src = 0;
    for (auto& v : idx) {
      v = src;
      for (size_t d = r; d-- > 0;) {
        ++counter[d];
        src += step[d];
        if (counter[d] < out[d]) break;
        src -= step[d] * out[d];
        counter[d] = 0;
      }
    }
    return idx;
  });
}

IndexMap pixel_shuffle_index(const Shape& in, int r) {
  if (in.size() != 4 || r < 1 || in[1] % (static_cast<int64_t>(r) * r) != 0) {
    throw ShapeError("pixel_shuffle: channels of " + to_string(in) + " not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  return cached_index("ps" + to_string(in) + std::to_string(r), [&] {
    const int64_t n = in[0], c = in[1] / (r * r), h = in[2], w = in[3];
    std::vector<int64_t> idx(static_cast<size_t>(numel(in)));
    size_t o = 0;
    for (int64_t b = 0; b < n; ++b)
      for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h * r; ++y)
          for (int64_t x = 0; x < w * r; ++x) {
            const int64_t src_c = ch * r * r + (y % r) * r + (x % r);
            idx[o++] = ((b * in[1] + src_c) * h + y / r) * w + x / r;
          }
    return idx;
  });
}

namespace {

int64_t reflect(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

IndexMap reflect_pad_index(const Shape& in, int pad) {
  if (in.size() != 4 || pad < 0) throw ShapeError("reflect_pad expects NCHW input, got " + to_string(in));
  return cached_index("rp" + to_string(in) + std::to_string(pad), [&] {
    const int64_t nc = in[0] * in[1], h = in[2], w = in[3];
    const int64_t ho = h + 2 * pad, wo = w + 2 * pad;
    std::vector<int64_t> idx(static_cast<size_t>(nc * ho * wo));
    size_t o = 0;
    for (int64_t p = 0; p < nc; ++p)
      for (int64_t y = 0; y < ho; ++y)
        for (int64_t x = 0; x < wo; ++x) idx[o++] = (p * h + reflect(y - pad, h)) * w + reflect(x - pad, w);
    return idx;
  });
}

namespace ag {
namespace {

template <typename T>
std::vector<T> buffer(int64_t n) {
  return std::vector<T>(static_cast<size_t>(n));
}

// Calls body(out_offset, b_offset, len, b_inner_stride) for every run along the
// last axis of `a`, where b is broadcast to a.
template <typename F>
void broadcast_rows(const Shape& a, const Shape& b, F&& body) {
  if (a.size() != b.size()) throw ShapeError("broadcast: rank mismatch " + to_string(a) + " vs " + to_string(b));
  const size_t r = a.size();
  std::vector<int64_t> bstride(r);
  int64_t s = 1;
  for (size_t i = r; i-- > 0;) {
    if (b[i] != a[i] && b[i] != 1) {
      throw ShapeError("broadcast: " + to_string(b) + " does not broadcast to " + to_string(a));
    }
    bstride[i] = (b[i] == 1 && a[i] != 1) ? 0 : s;
    s *= b[i];
  }
  const int64_t inner = r ? a[r - 1] : 1;
  const int64_t binner = r ? bstride[r - 1] : 0;
  const int64_t outer = numel(a) / inner;
  std::vector<int64_t> counter(r ? r - 1 : 0, 0);
  int64_t boff = 0;
  for (int64_t o = 0; o < outer; ++o) {
    body(o * inner, boff, inner, binner);
    for (size_t d = counter.size(); d-- > 0;) {
      ++counter[d];
      boff += bstride[d];
      if (counter[d] < a[d]) break;
      boff -= bstride[d] * a[d];
      counter[d] = 0;
    }
  }
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x_in, const Var<T>& w, const std::optional<Var<T>>& b, int stride, int pad,
              Padding padding) {
  if (x_in.rank() != 4 || w.rank() != 4 || x_in.dim(1) != w.dim(1)) {
    throw ShapeError("conv2d: input " + to_string(x_in.shape()) + " incompatible with weight " +
                     to_string(w.shape()));
  }
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  if (b && (b->rank() != 1 || b->dim(0) != w.dim(0))) {
    throw ShapeError("conv2d: bias " + to_string(b->shape()) + " does not match weight " + to_string(w.shape()));
  }
  Var<T> x = x_in;
  if (padding == Padding::kReflect && pad > 0) {
    x = reflect_pad(x_in, pad);
    pad = 0;
  }
  kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), stride, pad};
  if (g.out_h() < 1 || g.out_w() < 1) {
    throw ShapeError("conv2d: kernel " + to_string(w.shape()) + " larger than padded input " + to_string(x.shape()));
  }
  auto y = buffer<T>(g.batch * g.out_channels * g.out_h() * g.out_w());
  kernels::conv2d_forward(g, x.value().ptr(), w.value().ptr(), b ? b->value().ptr() : nullptr, y.data());
  std::vector<Var<T>> inputs{x, w};
  if (b) inputs.push_back(*b);
  const bool has_bias = b.has_value();
  return x.tape().record(Tensor<T>({g.batch, g.out_channels, g.out_h(), g.out_w()}, std::move(y)), inputs,
                         [g, has_bias](BackwardContext<T>& ctx) {
                           auto gx = ctx.grad_input(0);
                           auto gw = ctx.grad_input(1);
                           std::span<T> gb;
                           if (has_bias) gb = ctx.grad_input(2);
                           kernels::conv2d_backward(g, ctx.input(0).ptr(), ctx.input(1).ptr(), ctx.grad_output().data(),
                                                    gx.empty() ? nullptr : gx.data(),
                                                    gw.empty() ? nullptr : gw.data(),
                                                    gb.empty() ? nullptr : gb.data());
                         });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const std::optional<Var<T>>& b) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0)) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weight " + to_string(w.shape()));
  }
  const int64_t din = w.dim(0), dout = w.dim(1);
  if (b && (b->rank() != 1 || b->dim(0) != dout)) {
    throw ShapeError("linear: bias " + to_string(b->shape()) + " does not match weight " + to_string(w.shape()));
  }
  const int64_t rows = x.value().numel() / din;
  auto y = buffer<T>(rows * dout);
  if (b) {
    const T* bp = b->value().ptr();
    for (int64_t r = 0; r < rows; ++r) std::copy(bp, bp + dout, y.begin() + r * dout);
  }
  kernels::gemm(false, false, rows, dout, din, T(1), x.value().ptr(), din, w.value().ptr(), dout, b ? T(1) : T(0),
                y.data(), dout);
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  std::vector<Var<T>> inputs{x, w};
  if (b) inputs.push_back(*b);
  const bool has_bias = b.has_value();
  return x.tape().record(Tensor<T>(std::move(out_shape), std::move(y)), inputs,
                         [rows, din, dout, has_bias](BackwardContext<T>& ctx) {
                           const T* gy = ctx.grad_output().data();
                           if (auto gx = ctx.grad_input(0); !gx.empty()) {
                             kernels::gemm(false, true, rows, din, dout, T(1), gy, dout, ctx.input(1).ptr(), dout,
                                           T(1), gx.data(), din);
                           }
                           if (auto gw = ctx.grad_input(1); !gw.empty()) {
                             kernels::gemm(true, false, din, dout, rows, T(1), ctx.input(0).ptr(), din, gy, dout,
                                           T(1), gw.data(), dout);
                           }
                           if (has_bias) {
                             if (auto gb = ctx.grad_input(2); !gb.empty()) {
                               for (int64_t r = 0; r < rows; ++r)
                                 for (int64_t j = 0; j < dout; ++j) gb[static_cast<size_t>(j)] += gy[r * dout + j];
                             }
                           }
                         });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const int64_t c = x.dim(-1);
  if (gamma.value().numel() != c || beta.value().numel() != c) {
    throw ShapeError("layer_norm: affine parameters " + to_string(gamma.shape()) + " do not match input " +
                     to_string(x.shape()));
  }
  const int64_t rows = x.value().numel() / c;
  auto y = buffer<T>(rows * c);
  const T* xp = x.value().ptr();
  const T* gp = gamma.value().ptr();
  const T* bp = beta.value().ptr();
#pragma omp parallel for schedule(static) if (rows * c > 32768)
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = xp + r * c;
    T mu = T(0);
    for (int64_t j = 0; j < c; ++j) mu += row[j];
    mu /= T(c);
    T var = T(0);
    for (int64_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= T(c);
    const T rstd = T(1) / std::sqrt(var + T(eps));
    T* out = y.data() + r * c;
    for (int64_t j = 0; j < c; ++j) out[j] = (row[j] - mu) * rstd * gp[j] + bp[j];
  }
  return x.tape().record(
      Tensor<T>(x.shape(), std::move(y)), {x, gamma, beta}, [rows, c, eps](BackwardContext<T>& ctx) {
        const T* xp = ctx.input(0).ptr();
        const T* gp = ctx.input(1).ptr();
        const T* gy = ctx.grad_output().data();
        auto gx = ctx.grad_input(0);
        auto ggamma = ctx.grad_input(1);
        auto gbeta = ctx.grad_input(2);
        std::vector<T> xhat(static_cast<size_t>(c)), gxhat(static_cast<size_t>(c));
        for (int64_t r = 0; r < rows; ++r) {
          const T* row = xp + r * c;
          const T* grow = gy + r * c;
          T mu = T(0);
          for (int64_t j = 0; j < c; ++j) mu += row[j];
          mu /= T(c);
          T var = T(0);
          for (int64_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
          var /= T(c);
          const T rstd = T(1) / std::sqrt(var + T(eps));
          T mean_g = T(0), mean_gx = T(0);
          for (int64_t j = 0; j < c; ++j) {
            xhat[j] = (row[j] - mu) * rstd;
            gxhat[j] = grow[j] * gp[j];
            mean_g += gxhat[j];
            mean_gx += gxhat[j] * xhat[j];
          }
          mean_g /= T(c);
          mean_gx /= T(c);
          if (!gx.empty()) {
            T* out = gx.data() + r * c;
            for (int64_t j = 0; j < c; ++j) out[j] += rstd * (gxhat[j] - mean_g - xhat[j] * mean_gx);
          }
          if (!ggamma.empty())
            for (int64_t j = 0; j < c; ++j) ggamma[j] += grow[j] * xhat[j];
          if (!gbeta.empty())
            for (int64_t j = 0; j < c; ++j) gbeta[j] += grow[j];
        }
      });
}

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x) {
  const int64_t c = x.dim(-1);
  const int64_t rows = x.value().numel() / c;
  auto y = buffer<T>(rows * c);
  const T* xp = x.value().ptr();
#pragma omp parallel for schedule(static) if (rows * c > 32768)
  for (int64_t r = 0; r < rows; ++r) {
    const T* row = xp + r * c;
    T* out = y.data() + r * c;
    const T mx = *std::max_element(row, row + c);
    T s = T(0);
    for (int64_t j = 0; j < c; ++j) {
      out[j] = std::exp(row[j] - mx);
      s += out[j];
    }
    const T inv = T(1) / s;
    for (int64_t j = 0; j < c; ++j) out[j] *= inv;
  }
  return x.tape().record(Tensor<T>(x.shape(), std::move(y)), {x}, [rows, c](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* yp = ctx.output().ptr();
    const T* gy = ctx.grad_output().data();
#pragma omp parallel for schedule(static) if (rows * c > 32768)
    for (int64_t r = 0; r < rows; ++r) {
      const T* yr = yp + r * c;
      const T* gr = gy + r * c;
      T dot = T(0);
      for (int64_t j = 0; j < c; ++j) dot += yr[j] * gr[j];
      T* out = gx.data() + r * c;
      for (int64_t j = 0; j < c; ++j) out[j] += yr[j] * (gr[j] - dot);
    }
  });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  const int64_t n = x.value().numel();
  auto y = buffer<T>(n);
  const T* xp = x.value().ptr();
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
#pragma omp parallel for schedule(static) if (n > 32768)
  for (int64_t i = 0; i < n; ++i) y[i] = T(0.5) * xp[i] * (T(1) + std::erf(xp[i] * inv_sqrt2));
  return x.tape().record(Tensor<T>(x.shape(), std::move(y)), {x}, [n, inv_sqrt2](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* xp = ctx.input(0).ptr();
    const T* gy = ctx.grad_output().data();
    const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
#pragma omp parallel for schedule(static) if (n > 32768)
    for (int64_t i = 0; i < n; ++i) {
      const T v = xp[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
      gx[i] += gy[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  const int64_t n = x.value().numel();
  auto y = buffer<T>(n);
  const T* xp = x.value().ptr();
  for (int64_t i = 0; i < n; ++i) y[i] = T(1) / (T(1) + std::exp(-xp[i]));
  return x.tape().record(Tensor<T>(x.shape(), std::move(y)), {x}, [n](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* yp = ctx.output().ptr();
    const T* gy = ctx.grad_output().data();
    for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * yp[i] * (T(1) - yp[i]);
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  auto y = a.value().to_vector();
  const T* bp = b.value().ptr();
  if (as == bs) {
    const int64_t n = static_cast<int64_t>(y.size());
    for (int64_t i = 0; i < n; ++i) y[i] += bp[i];
  } else {
    broadcast_rows(as, bs, [&](int64_t off, int64_t boff, int64_t len, int64_t bstep) {
      for (int64_t j = 0; j < len; ++j) y[off + j] += bp[boff + j * bstep];
    });
  }
  return a.tape().record(Tensor<T>(as, std::move(y)), {a, b}, [as, bs](BackwardContext<T>& ctx) {
    const T* gy = ctx.grad_output().data();
    if (auto ga = ctx.grad_input(0); !ga.empty()) {
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i];
    }
    if (auto gb = ctx.grad_input(1); !gb.empty()) {
      if (as == bs) {
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i];
      } else {
        broadcast_rows(as, bs, [&](int64_t off, int64_t boff, int64_t len, int64_t bstep) {
          for (int64_t j = 0; j < len; ++j) gb[boff + j * bstep] += gy[off + j];
        });
      }
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  auto y = a.value().to_vector();
  const T* bp = b.value().ptr();
  if (as == bs) {
    for (size_t i = 0; i < y.size(); ++i) y[i] *= bp[i];
  } else {
    broadcast_rows(as, bs, [&](int64_t off, int64_t boff, int64_t len, int64_t bstep) {
      for (int64_t j = 0; j < len; ++j) y[off + j] *= bp[boff + j * bstep];
    });
  }
  return a.tape().record(Tensor<T>(as, std::move(y)), {a, b}, [as, bs](BackwardContext<T>& ctx) {
    const T* gy = ctx.grad_output().data();
    const T* ap = ctx.input(0).ptr();
    const T* bp = ctx.input(1).ptr();
    auto ga = ctx.grad_input(0);
    auto gb = ctx.grad_input(1);
    if (as == bs) {
      if (!ga.empty())
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bp[i];
      if (!gb.empty())
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * ap[i];
      return;
    }
    broadcast_rows(as, bs, [&](int64_t off, int64_t boff, int64_t len, int64_t bstep) {
      for (int64_t j = 0; j < len; ++j) {
        if (!ga.empty()) ga[off + j] += gy[off + j] * bp[boff + j * bstep];
        if (!gb.empty()) gb[boff + j * bstep] += gy[off + j] * ap[off + j];
      }
    });
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, double s) {
  auto y = x.value().to_vector();
  const T f = static_cast<T>(s);
  for (auto& v : y) v *= f;
  return x.tape().record(Tensor<T>(x.shape(), std::move(y)), {x}, [f](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* gy = ctx.grad_output().data();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += f * gy[i];
  });
}

template <typename T>
Var<T> mean_axis(const Var<T>& x, int axis) {
  const int r = x.rank();
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) throw ShapeError("mean_axis: axis out of range for " + to_string(x.shape()));
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < a; ++i) outer *= s[i];
  for (int i = a + 1; i < r; ++i) inner *= s[i];
  const int64_t len = s[a];
  Shape out_shape = s;
  out_shape[a] = 1;
  auto y = buffer<T>(outer * inner);
  const T* xp = x.value().ptr();
  for (int64_t o = 0; o < outer; ++o) {
    T* dst = y.data() + o * inner;
    for (int64_t l = 0; l < len; ++l) {
      const T* src = xp + (o * len + l) * inner;
      for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
    for (int64_t i = 0; i < inner; ++i) dst[i] /= T(len);
  }
  return x.tape().record(Tensor<T>(std::move(out_shape), std::move(y)), {x},
                         [outer, inner, len](BackwardContext<T>& ctx) {
                           auto gx = ctx.grad_input(0);
                           const T* gy = ctx.grad_output().data();
                           for (int64_t o = 0; o < outer; ++o)
                             for (int64_t l = 0; l < len; ++l) {
                               T* dst = gx.data() + (o * len + l) * inner;
                               for (int64_t i = 0; i < inner; ++i) dst[i] += gy[o * inner + i] / T(len);
                             }
                         });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = T(0);
  for (T v : x.value().data()) s += v;
  return x.tape().record(Tensor<T>::scalar(s), {x}, [](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T g = ctx.grad_output()[0];
    for (auto& v : gx) v += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.value().numel()));
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w) {
  if (w.shape() != x.shape()) {
    throw ShapeError("weighted_sum: weights " + to_string(w.shape()) + " vs input " + to_string(x.shape()));
  }
  T s = T(0);
  const T* xp = x.value().ptr();
  for (int64_t i = 0; i < w.numel(); ++i) s += xp[i] * w[i];
  return x.tape().record(Tensor<T>::scalar(s), {x}, [w](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T g = ctx.grad_output()[0];
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g * w[static_cast<int64_t>(i)];
  });
}

template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("l1_loss: prediction " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
  }
  const int64_t n = target.numel();
  const T* pp = pred.value().ptr();
  const T* tp = target.ptr();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += std::abs(static_cast<double>(pp[i]) - static_cast<double>(tp[i]));
  return pred.tape().record(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(n))), {pred},
                            [target, n](BackwardContext<T>& ctx) {
                              auto gp = ctx.grad_input(0);
                              const T* pp = ctx.input(0).ptr();
                              const T g = ctx.grad_output()[0] / T(n);
                              for (int64_t i = 0; i < n; ++i) {
                                const T d = pp[i] - target[i];
                                gp[i] += d > T(0) ? g : (d < T(0) ? -g : T(0));
                              }
                            });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> y = x.value().reshape(std::move(shape));
  return x.tape().record(std::move(y), {x}, [](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* gy = ctx.grad_output().data();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
}

template <typename T>
Var<T> gather(const Var<T>& x, Shape out_shape, IndexMap index) {
  const int64_t n = numel(out_shape);
  if (!index || static_cast<int64_t>(index->size()) != n) {
    throw ShapeError("gather: index map size does not match output shape " + to_string(out_shape));
  }
  auto y = buffer<T>(n);
  const T* xp = x.value().ptr();
  const int64_t* ip = index->data();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (int64_t i = 0; i < n; ++i) y[i] = xp[ip[i]];
  return x.tape().record(Tensor<T>(std::move(out_shape), std::move(y)), {x}, [index](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* gy = ctx.grad_output().data();
    const int64_t* ip = index->data();
    const size_t n = index->size();
    for (size_t i = 0; i < n; ++i) gx[ip[i]] += gy[i];
  });
}

template <typename T>
Var<T> concat_lastdim(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_lastdim: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<int64_t> widths;
  int64_t total = 0;
  for (const auto& p : parts) {
    Shape l = p.shape();
    const int64_t w = l.back();
    l.pop_back();
    if (l != lead) throw ShapeError("concat_lastdim: leading dims differ, " + to_string(parts[0].shape()) + " vs " + to_string(p.shape()));
    widths.push_back(w);
    total += w;
  }
  const int64_t rows = numel(lead);
  auto y = buffer<T>(rows * total);
  int64_t off = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].value().ptr();
    for (int64_t r = 0; r < rows; ++r) std::copy(src + r * widths[k], src + (r + 1) * widths[k], y.begin() + r * total + off);
    off += widths[k];
  }
  Shape out = lead;
  out.push_back(total);
  return parts[0].tape().record(Tensor<T>(std::move(out), std::move(y)), parts,
                                [widths, rows, total](BackwardContext<T>& ctx) {
                                  const T* gy = ctx.grad_output().data();
                                  int64_t off = 0;
                                  for (size_t k = 0; k < widths.size(); ++k) {
                                    auto g = ctx.grad_input(k);
                                    if (!g.empty()) {
                                      for (int64_t r = 0; r < rows; ++r)
                                        for (int64_t j = 0; j < widths[k]; ++j) g[r * widths[k] + j] += gy[r * total + off + j];
                                    }
                                    off += widths[k];
                                  }
                                });
}

template <typename T>
Var<T> slice_lastdim(const Var<T>& x, int64_t begin, int64_t end) {
  const int64_t c = x.dim(-1);
  if (begin < 0 || end > c || begin >= end) {
    throw ShapeError("slice_lastdim: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                     to_string(x.shape()));
  }
  const int64_t rows = x.value().numel() / c;
  const int64_t w = end - begin;
  auto y = buffer<T>(rows * w);
  const T* xp = x.value().ptr();
  for (int64_t r = 0; r < rows; ++r) std::copy(xp + r * c + begin, xp + r * c + end, y.begin() + r * w);
  Shape out = x.shape();
  out.back() = w;
  return x.tape().record(Tensor<T>(std::move(out), std::move(y)), {x}, [rows, c, w, begin](BackwardContext<T>& ctx) {
    auto gx = ctx.grad_input(0);
    const T* gy = ctx.grad_output().data();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < w; ++j) gx[r * c + begin + j] += gy[r * w + j];
  });
}

template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool ta, bool tb) {
  if (a.rank() < 2 || a.rank() != b.rank()) {
    throw ShapeError("bmm: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Shape lead(a.shape().begin(), a.shape().end() - 2);
  if (!std::equal(lead.begin(), lead.end(), b.shape().begin())) {
    throw ShapeError("bmm: batch dims differ, " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const int64_t m = ta ? a.dim(-1) : a.dim(-2);
  const int64_t k = ta ? a.dim(-2) : a.dim(-1);
  const int64_t kb = tb ? b.dim(-1) : b.dim(-2);
  const int64_t n = tb ? b.dim(-2) : b.dim(-1);
  if (k != kb) throw ShapeError("bmm: inner dims differ, " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const int64_t batch = numel(lead);
  auto y = buffer<T>(batch * m * n);
  kernels::gemm_batched(ta, tb, batch, m, n, k, T(1), a.value().ptr(), m * k, b.value().ptr(), k * n, T(0), y.data(),
                        m * n);
  Shape out = lead;
  out.push_back(m);
  out.push_back(n);
  return a.tape().record(Tensor<T>(std::move(out), std::move(y)), {a, b},
                         [ta, tb, batch, m, n, k](BackwardContext<T>& ctx) {
                           const T* g = ctx.grad_output().data();
                           const T* ap = ctx.input(0).ptr();
                           const T* bp = ctx.input(1).ptr();
                           if (auto ga = ctx.grad_input(0); !ga.empty()) {
                             if (!ta) {
                               kernels::gemm_batched(false, !tb, batch, m, k, n, T(1), g, m * n, bp, k * n, T(1),
                                                     ga.data(), m * k);
                             } else {
                               kernels::gemm_batched(tb, true, batch, k, m, n, T(1), bp, k * n, g, m * n, T(1),
                                                     ga.data(), m * k);
                             }
                           }
                           if (auto gb = ctx.grad_input(1); !gb.empty()) {
                             if (!tb) {
                               kernels::gemm_batched(!ta, false, batch, k, n, m, T(1), ap, m * k, g, m * n, T(1),
                                                     gb.data(), k * n);
                             } else {
                               kernels::gemm_batched(true, ta, batch, n, k, m, T(1), g, m * n, ap, m * k, T(1),
                                                     gb.data(), k * n);
                             }
                           }
                         });
}

template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int r) {
  const Shape& s = x.shape();
  auto idx = pixel_shuffle_index(s, r);
  return gather(x, Shape{s[0], s[1] / (r * r), s[2] * r, s[3] * r}, idx);
}

template <typename T>
Var<T> nchw_to_nhwc(const Var<T>& x) {
  if (x.rank() != 4) throw ShapeError("nchw_to_nhwc expects rank 4, got " + to_string(x.shape()));
  const std::vector<int> perm{0, 2, 3, 1};
  return gather(x, permute_shape(x.shape(), perm), permute_index(x.shape(), perm));
}

template <typename T>
Var<T> nhwc_to_nchw(const Var<T>& x) {
  if (x.rank() != 4) throw ShapeError("nhwc_to_nchw expects rank 4, got " + to_string(x.shape()));
  const std::vector<int> perm{0, 3, 1, 2};
  return gather(x, permute_shape(x.shape(), perm), permute_index(x.shape(), perm));
}

template <typename T>
Var<T> reflect_pad(const Var<T>& x, int pad) {
  const Shape& s = x.shape();
  auto idx = reflect_pad_index(s, pad);
  return gather(x, Shape{s[0], s[1], s[2] + 2 * pad, s[3] + 2 * pad}, idx);
}

#define HMA_INSTANTIATE(T)                                                                                 \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&, int, int, Padding); \
  template Var<T> linear(const Var<T>&, const Var<T>&, const std::optional<Var<T>>&);                     \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);                        \
  template Var<T> softmax_lastdim(const Var<T>&);                                                          \
  template Var<T> gelu(const Var<T>&);                                                                     \
  template Var<T> sigmoid(const Var<T>&);                                                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> scale(const Var<T>&, double);                                                            \
  template Var<T> mean_axis(const Var<T>&, int);                                                           \
  template Var<T> sum(const Var<T>&);                                                                      \
  template Var<T> mean(const Var<T>&);                                                                     \
  template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);                                           \
  template Var<T> l1_loss(const Var<T>&, const Tensor<T>&);                                                \
  template Var<T> reshape(const Var<T>&, Shape);                                                           \
  template Var<T> gather(const Var<T>&, Shape, IndexMap);                                                  \
  template Var<T> concat_lastdim(const std::vector<Var<T>>&);                                              \
  template Var<T> slice_lastdim(const Var<T>&, int64_t, int64_t);                                          \
  template Var<T> bmm(const Var<T>&, const Var<T>&, bool, bool);                                           \
  template Var<T> pixel_shuffle(const Var<T>&, int);                                                       \
  template Var<T> nchw_to_nhwc(const Var<T>&);                                                             \
  template Var<T> nhwc_to_nchw(const Var<T>&);                                                             \
  template Var<T> reflect_pad(const Var<T>&, int);

HMA_INSTANTIATE(float)
HMA_INSTANTIATE(double)
#undef HMA_INSTANTIATE

}  // namespace ag
}  // namespace hma
