#pragma once

// Differentiable operations over Tape-recorded values. Each op computes its
// forward result eagerly and records the adjoint needed by Tape::backward.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hma/autograd.hpp"

namespace hma {

/// Flat source-offset map for gather-style ops: out[i] = in[index[i]].
using IndexMap = std::shared_ptr<const std::vector<int64_t>>;

/// Returns the map stored under `key`, building it on first use.
IndexMap cached_index(const std::string& key, const std::function<std::vector<int64_t>()>& build);

enum class Padding { kZero, kReflect };

namespace ag {

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const std::optional<Var<T>>& b, int stride, int pad,
              Padding padding = Padding::kZero);
/// y = x * w + b over the last axis; w is Din x Dout.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const std::optional<Var<T>>& b);
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-5);
template <typename T>
Var<T> softmax_lastdim(const Var<T>& x);
template <typename T>
Var<T> gelu(const Var<T>& x);
template <typename T>
Var<T> sigmoid(const Var<T>& x);

/// Elementwise with b broadcast to a's shape (equal rank, b dims 1 or equal).
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& x, double s);

/// Mean over one axis, kept with extent 1.
template <typename T>
Var<T> mean_axis(const Var<T>& x, int axis);
template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);
/// sum(x * w) with w a constant of the same shape.
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w);
/// Mean absolute difference against a constant target.
template <typename T>
Var<T> l1_loss(const Var<T>& pred, const Tensor<T>& target);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T>
Var<T> gather(const Var<T>& x, Shape out_shape, IndexMap index);
template <typename T>
Var<T> concat_lastdim(const std::vector<Var<T>>& parts);
template <typename T>
Var<T> slice_lastdim(const Var<T>& x, int64_t begin, int64_t end);

/// Batched op(a) * op(b) over matching leading dims.
template <typename T>
Var<T> bmm(const Var<T>& a, const Var<T>& b, bool trans_a = false, bool trans_b = false);

/// N x (C r^2) x H x W -> N x C x rH x rW.
template <typename T>
Var<T> pixel_shuffle(const Var<T>& x, int r);
/// N x C x H x W <-> N x H x W x C.
template <typename T>
Var<T> nchw_to_nhwc(const Var<T>& x);
template <typename T>
Var<T> nhwc_to_nchw(const Var<T>& x);
/// Mirror padding (edge sample not repeated) of an NCHW map.
template <typename T>
Var<T> reflect_pad(const Var<T>& x, int pad);

}  // namespace ag

/// Index maps shared by the ops above and by the attention module.
IndexMap pixel_shuffle_index(const Shape& in, int r);
IndexMap permute_index(const Shape& in, const std::vector<int>& perm);
IndexMap reflect_pad_index(const Shape& in, int pad);
Shape permute_shape(const Shape& in, const std::vector<int>& perm);

}  // namespace hma
