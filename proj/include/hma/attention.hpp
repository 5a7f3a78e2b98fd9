#pragma once

// Window partitioning, grid shuffling, relative position bias and the
// window / grid attention kernels. Token maps are N x H x W x C.

#include <functional>
#include <string>

#include "hma/ag_ops.hpp"

namespace hma {

struct WindowSpec {
  int window = 8;  // M, tokens per side
  int shift = 0;   // cyclic roll applied before partitioning, 0 <= shift < M
};

struct GridSpec {
  int interval = 2;  // K
  int64_t group_h = 0;
  int64_t group_w = 0;
};

GridSpec make_grid_spec(int interval, int64_t height, int64_t width);

/// Observer for intermediate activations (q, k, v, g, attn, ...).
template <typename T>
using Capture = std::function<void(const std::string& tag, const Var<T>& value)>;

/// Learnable projections of one attention layer. Weights are Din x Dout.
template <typename T>
struct AttentionVars {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Var<T> table;  // (2a-1)(2b-1) x heads
  int heads = 1;
};

// Index maps. Partition/shuffle maps send NHWC tokens to (groups, tokens, C).
IndexMap window_partition_index(const Shape& nhwc, const WindowSpec& spec);
IndexMap grid_shuffle_index(const Shape& nhwc, int interval);
/// Inverse permutation of `index`.
IndexMap inverse_index(const IndexMap& index, const std::string& key);

/// Relative-position index for an a x b token grid into a table built for an
/// extent of table_a x table_b (table_a >= a, table_b >= b). Entry [i*T + j]
/// is the table row for query i and key j.
IndexMap relative_position_index(int64_t a, int64_t b, int64_t table_a, int64_t table_b);
int64_t bias_table_rows(int64_t a, int64_t b);

template <typename T>
Var<T> window_partition(const Var<T>& x, const WindowSpec& spec);
template <typename T>
Var<T> window_reverse(const Var<T>& windows, const WindowSpec& spec, int64_t height, int64_t width);

/// Additive mask (windows x T x T): 0 within a pre-shift region, -100 across.
template <typename T>
Tensor<T> shift_mask(const WindowSpec& spec, int64_t height, int64_t width);

template <typename T>
Var<T> grid_shuffle(const Var<T>& x, int interval);
template <typename T>
Var<T> grid_unshuffle(const Var<T>& groups, int interval, int64_t height, int64_t width);

/// Per-head bias (1 x heads x T x T) for an a x b token grid.
template <typename T>
Var<T> gather_bias(const Var<T>& table, int heads, int64_t a, int64_t b, int64_t table_a, int64_t table_b);

/// Multi-head attention over B x T x C windows. `bias` is 1 x heads x T x T;
/// `mask` (windows x T x T) is applied to consecutive runs of B / windows.
template <typename T>
Var<T> msa(const Var<T>& x, const AttentionVars<T>& p, const Var<T>& bias, const Tensor<T>* mask = nullptr,
           const Capture<T>* capture = nullptr);

/// Two-stage grid attention over B x T x C groups:
///   X^ = softmax(G K^T s + B) V,  out = softmax(Q G^T s + B) X^.
/// `g` is the projected interaction feature with the same shape as `x`.
template <typename T>
Var<T> grid_msa(const Var<T>& x, const Var<T>& g, const AttentionVars<T>& p, const Var<T>& bias, double scale,
                const Capture<T>* capture = nullptr);

/// B x T x C <-> B x heads x T x d.
template <typename T>
Var<T> split_heads(const Var<T>& x, int heads);
template <typename T>
Var<T> merge_heads(const Var<T>& x);

}  // namespace hma
