#include "hma/attention.hpp"

#include <cmath>

namespace hma {
namespace {

void check_nhwc(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + " expects N x H x W x C tokens, got " + to_string(s));
}

std::string key_of(const char* tag, const Shape& s, int64_t a, int64_t b = 0) {
  return std::string(tag) + to_string(s) + "/" + std::to_string(a) + "/" + std::to_string(b);
}

}  // namespace

GridSpec make_grid_spec(int interval, int64_t height, int64_t width) {
  if (interval < 1 || height % interval != 0 || width % interval != 0) {
    throw ShapeError("grid interval " + std::to_string(interval) + " does not divide " + std::to_string(height) +
                     " x " + std::to_string(width));
  }
  return GridSpec{interval, height / interval, width / interval};
}

IndexMap window_partition_index(const Shape& s, const WindowSpec& spec) {
  check_nhwc(s, "window_partition");
  const int64_t m = spec.window;
  if (m < 1 || spec.shift < 0 || spec.shift >= m) {
    throw ShapeError("window spec needs 0 <= shift < window, got window " + std::to_string(m) + " shift " +
                     std::to_string(spec.shift));
  }
  if (s[1] % m != 0 || s[2] % m != 0) {
    throw ShapeError("window_partition: " + std::to_string(s[1]) + " x " + std::to_string(s[2]) +
                     " not divisible by window " + std::to_string(m));
  }
  return cached_index(key_of("wp", s, m, spec.shift), [&] {
    const int64_t n = s[0], h = s[1], w = s[2], c = s[3], sh = spec.shift;
    std::vector<int64_t> idx(static_cast<size_t>(numel(s)));
    size_t o = 0;
    for (int64_t b = 0; b < n; ++b)
      for (int64_t wy = 0; wy < h / m; ++wy)
        for (int64_t wx = 0; wx < w / m; ++wx)
          for (int64_t ty = 0; ty < m; ++ty)
            for (int64_t tx = 0; tx < m; ++tx) {
              const int64_t y = (wy * m + ty + sh) % h;
              const int64_t x = (wx * m + tx + sh) % w;
              const int64_t base = ((b * h + y) * w + x) * c;
              for (int64_t ch = 0; ch < c; ++ch) idx[o++] = base + ch;
            }
    return idx;
  });
}

IndexMap grid_shuffle_index(const Shape& s, int k) {
  check_nhwc(s, "grid_shuffle");
  make_grid_spec(k, s[1], s[2]);
  return cached_index(key_of("gs", s, k), [&] {
    const int64_t n = s[0], h = s[1], w = s[2], c = s[3];
    std::vector<int64_t> idx(static_cast<size_t>(numel(s)));
    size_t o = 0;
    for (int64_t b = 0; b < n; ++b)
      for (int64_t gi = 0; gi < k; ++gi)
        for (int64_t gj = 0; gj < k; ++gj)
          for (int64_t a = 0; a < h / k; ++a)
            for (int64_t e = 0; e < w / k; ++e) {
              const int64_t base = ((b * h + a * k + gi) * w + e * k + gj) * c;
              for (int64_t ch = 0; ch < c; ++ch) idx[o++] = base + ch;
            }
    return idx;
  });
}

IndexMap inverse_index(const IndexMap& index, const std::string& key) {
  return cached_index("inv:" + key, [&] {
    std::vector<int64_t> inv(index->size());
    for (size_t i = 0; i < index->size(); ++i) inv[static_cast<size_t>((*index)[i])] = static_cast<int64_t>(i);
    return inv;
  });
}

int64_t bias_table_rows(int64_t a, int64_t b) { return (2 * a - 1) * (2 * b - 1); }

IndexMap relative_position_index(int64_t a, int64_t b, int64_t ta, int64_t tb) {
  if (a > ta || b > tb) {
    throw ShapeError("token grid " + std::to_string(a) + " x " + std::to_string(b) + " exceeds bias table extent " +
                     std::to_string(ta) + " x " + std::to_string(tb));
  }
  return cached_index("rel/" + std::to_string(a) + "/" + std::to_string(b) + "/" + std::to_string(ta) + "/" +
                          std::to_string(tb),
                      [&] {
                        const int64_t t = a * b;
                        std::vector<int64_t> idx(static_cast<size_t>(t * t));
                        for (int64_t i = 0; i < t; ++i)
                          for (int64_t j = 0; j < t; ++j) {
                            const int64_t dy = i / b - j / b + ta - 1;
                            const int64_t dx = i % b - j % b + tb - 1;
                            idx[static_cast<size_t>(i * t + j)] = dy * (2 * tb - 1) + dx;
                          }
                        return idx;
                      });
}

template <typename T>
Var<T> window_partition(const Var<T>& x, const WindowSpec& spec) {
  const Shape& s = x.shape();
  auto idx = window_partition_index(s, spec);
  const int64_t m = spec.window;
  return ag::gather(x, Shape{s[0] * (s[1] / m) * (s[2] / m), m * m, s[3]}, idx);
}

template <typename T>
Var<T> window_reverse(const Var<T>& wins, const WindowSpec& spec, int64_t height, int64_t width) {
  const int64_t m = spec.window;
  if (wins.rank() != 3 || wins.dim(1) != m * m || height % m != 0 || width % m != 0 ||
      wins.dim(0) % ((height / m) * (width / m)) != 0) {
    throw ShapeError("window_reverse: windows " + to_string(wins.shape()) + " inconsistent with " +
                     std::to_string(height) + " x " + std::to_string(width) + " and window " + std::to_string(m));
  }
  const Shape full{wins.dim(0) / ((height / m) * (width / m)), height, width, wins.dim(2)};
  auto fwd = window_partition_index(full, spec);
  return ag::gather(wins, full, inverse_index(fwd, key_of("wp", full, m, spec.shift)));
}

template <typename T>
Tensor<T> shift_mask(const WindowSpec& spec, int64_t height, int64_t width) {
  const int64_t m = spec.window, sh = spec.shift;
  if (sh <= 0) throw std::invalid_argument("shift_mask requires a positive shift");
  auto region = [&](int64_t v, int64_t extent) { return v < extent - m ? 0 : (v < extent - sh ? 1 : 2); };
  const int64_t nwy = height / m, nwx = width / m, t = m * m;
  if (height % m != 0 || width % m != 0) throw ShapeError("shift_mask: map not divisible by window");
  std::vector<T> mask(static_cast<size_t>(nwy * nwx * t * t));
  std::vector<int> label(static_cast<size_t>(t));
  size_t o = 0;
  for (int64_t wy = 0; wy < nwy; ++wy)
    for (int64_t wx = 0; wx < nwx; ++wx) {
      for (int64_t i = 0; i < t; ++i) {
        label[i] = region(wy * m + i / m, height) * 3 + region(wx * m + i % m, width);
      }
      for (int64_t i = 0; i < t; ++i)
        for (int64_t j = 0; j < t; ++j) mask[o++] = label[i] == label[j] ? T(0) : T(-100);
    }
  return Tensor<T>({nwy * nwx, t, t}, std::move(mask));
}

template <typename T>
Var<T> grid_shuffle(const Var<T>& x, int k) {
  const Shape& s = x.shape();
  auto idx = grid_shuffle_index(s, k);
  return ag::gather(x, Shape{s[0] * k * k, s[1] / k, s[2] / k, s[3]}, idx);
}

template <typename T>
Var<T> grid_unshuffle(const Var<T>& groups, int k, int64_t height, int64_t width) {
  if (groups.rank() != 4 || k < 1 || groups.dim(0) % (static_cast<int64_t>(k) * k) != 0 ||
      groups.dim(1) * k != height || groups.dim(2) * k != width) {
    throw ShapeError("grid_unshuffle: groups " + to_string(groups.shape()) + " inconsistent with " +
                     std::to_string(height) + " x " + std::to_string(width) + " and interval " + std::to_string(k));
  }
  const Shape full{groups.dim(0) / (k * k), height, width, groups.dim(3)};
  auto fwd = grid_shuffle_index(full, k);
  return ag::gather(groups, full, inverse_index(fwd, key_of("gs", full, k)));
}

template <typename T>
Var<T> gather_bias(const Var<T>& table, int heads, int64_t a, int64_t b, int64_t ta, int64_t tb) {
  if (table.rank() != 2 || table.dim(0) != bias_table_rows(ta, tb) || table.dim(1) != heads) {
    throw ShapeError("bias table " + to_string(table.shape()) + " does not match extent " + std::to_string(ta) +
                     " x " + std::to_string(tb) + " with " + std::to_string(heads) + " heads");
  }
  auto rel = relative_position_index(a, b, ta, tb);
  const int64_t t = a * b;
  auto idx = cached_index("bias/" + std::to_string(heads) + "/" + std::to_string(a) + "/" + std::to_string(b) + "/" +
                              std::to_string(ta) + "/" + std::to_string(tb),
                          [&] {
                            std::vector<int64_t> out(static_cast<size_t>(heads * t * t));
                            size_t o = 0;
                            for (int64_t h = 0; h < heads; ++h)
                              for (int64_t i = 0; i < t * t; ++i) out[o++] = (*rel)[static_cast<size_t>(i)] * heads + h;
                            return out;
                          });
  return ag::gather(table, Shape{1, heads, t, t}, idx);
}

template <typename T>
Var<T> split_heads(const Var<T>& x, int heads) {
  const int64_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  if (heads < 1 || c % heads != 0) {
    throw ShapeError("channels " + std::to_string(c) + " not divisible by " + std::to_string(heads) + " heads");
  }
  const Shape s{b, t, heads, c / heads};
  const std::vector<int> perm{0, 2, 1, 3};
  return ag::gather(x, permute_shape(s, perm), permute_index(s, perm));
}

template <typename T>
Var<T> merge_heads(const Var<T>& x) {
  const std::vector<int> perm{0, 2, 1, 3};
  const Shape s = x.shape();
  Var<T> y = ag::gather(x, permute_shape(s, perm), permute_index(s, perm));
  return ag::reshape(y, Shape{s[0], s[2], s[1] * s[3]});
}

namespace {

template <typename T>
void emit(const Capture<T>* capture, const char* tag, const Var<T>& v) {
  if (capture && *capture) (*capture)(tag, v);
}

}  // namespace

template <typename T>
Var<T> msa(const Var<T>& x, const AttentionVars<T>& p, const Var<T>& bias, const Tensor<T>* mask,
           const Capture<T>* capture) {
  if (x.rank() != 3) throw ShapeError("msa expects B x T x C windows, got " + to_string(x.shape()));
  const int64_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  const int h = p.heads;
  if (h < 1 || c % h != 0) throw ShapeError("msa: channels " + std::to_string(c) + " not divisible by heads");
  Var<T> q = ag::linear(x, p.wq, std::optional<Var<T>>(p.bq));
  Var<T> k = ag::linear(x, p.wk, std::optional<Var<T>>(p.bk));
  Var<T> v = ag::linear(x, p.wv, std::optional<Var<T>>(p.bv));
  emit(capture, "q", q);
  emit(capture, "k", k);
  emit(capture, "v", v);
  const double scale = 1.0 / std::sqrt(static_cast<double>(c / h));
  Var<T> logits = ag::scale(ag::bmm(split_heads(q, h), split_heads(k, h), false, true), scale);
  if (bias.valid()) logits = ag::add(logits, bias);
  if (mask) {
    const int64_t nw = mask->dim(0);
    if (b % nw != 0 || mask->dim(1) != t) throw ShapeError("msa: mask " + to_string(mask->shape()) + " vs windows");
    Var<T> m = x.tape().constant(mask->reshape({1, nw, 1, t, t}));
    logits = ag::reshape(ag::add(ag::reshape(logits, Shape{b / nw, nw, h, t, t}), m), Shape{b, h, t, t});
  }
  Var<T> attn = ag::softmax_lastdim(logits);
  emit(capture, "attn", attn);
  Var<T> out = merge_heads(ag::bmm(attn, split_heads(v, h)));
  return ag::linear(out, p.wo, std::optional<Var<T>>(p.bo));
}

template <typename T>
Var<T> grid_msa(const Var<T>& x, const Var<T>& g, const AttentionVars<T>& p, const Var<T>& bias, double scale,
                const Capture<T>* capture) {
  if (x.rank() != 3 || g.shape() != x.shape()) {
    throw ShapeError("grid_msa: groups " + to_string(x.shape()) + " and interaction feature " + to_string(g.shape()) +
                     " must share geometry");
  }
  const int h = p.heads;
  if (h < 1 || x.dim(2) % h != 0) throw ShapeError("grid_msa: channels not divisible by heads");
  Var<T> q = ag::linear(x, p.wq, std::optional<Var<T>>(p.bq));
  Var<T> k = ag::linear(x, p.wk, std::optional<Var<T>>(p.bk));
  Var<T> v = ag::linear(x, p.wv, std::optional<Var<T>>(p.bv));
  emit(capture, "q", q);
  emit(capture, "k", k);
  emit(capture, "v", v);
  emit(capture, "g", g);
  Var<T> qh = split_heads(q, h), kh = split_heads(k, h), vh = split_heads(v, h), gh = split_heads(g, h);
  Var<T> l1 = ag::scale(ag::bmm(gh, kh, false, true), scale);
  if (bias.valid()) l1 = ag::add(l1, bias);
  Var<T> a1 = ag::softmax_lastdim(l1);
  emit(capture, "attn_gather", a1);
  Var<T> xhat = ag::bmm(a1, vh);
  Var<T> l2 = ag::scale(ag::bmm(qh, gh, false, true), scale);
  if (bias.valid()) l2 = ag::add(l2, bias);
  Var<T> a2 = ag::softmax_lastdim(l2);
  emit(capture, "attn_scatter", a2);
  Var<T> out = merge_heads(ag::bmm(a2, xhat));
  return ag::linear(out, p.wo, std::optional<Var<T>>(p.bo));
}

#define HMA_INSTANTIATE(T)                                                                                    \
  template Var<T> window_partition(const Var<T>&, const WindowSpec&);                                         \
  template Var<T> window_reverse(const Var<T>&, const WindowSpec&, int64_t, int64_t);                        \
  template Tensor<T> shift_mask(const WindowSpec&, int64_t, int64_t);                                        \
  template Var<T> grid_shuffle(const Var<T>&, int);                                                           \
  template Var<T> grid_unshuffle(const Var<T>&, int, int64_t, int64_t);                                       \
  template Var<T> gather_bias(const Var<T>&, int, int64_t, int64_t, int64_t, int64_t);                        \
  template Var<T> split_heads(const Var<T>&, int);                                                            \
  template Var<T> merge_heads(const Var<T>&);                                                                 \
  template Var<T> msa(const Var<T>&, const AttentionVars<T>&, const Var<T>&, const Tensor<T>*,                \
                      const Capture<T>*);                                                                     \
  template Var<T> grid_msa(const Var<T>&, const Var<T>&, const AttentionVars<T>&, const Var<T>&, double,      \
                           const Capture<T>*);

HMA_INSTANTIATE(float)
HMA_INSTANTIATE(double)
#undef HMA_INSTANTIATE

}  // namespace hma
