#pragma once

// Tensor-in, tensor-out forms of the differentiable ops, for callers that do
// not need gradients.

#include <optional>

#include "hma/ag_ops.hpp"

namespace hma::ops {

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const std::optional<Tensor<T>>& b, int stride, int pad,
                 Padding padding = Padding::kZero);
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const std::optional<Tensor<T>>& b);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps = 1e-5);
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x);
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r);
/// out[i] = x[index[i]].
template <typename T>
Tensor<T> gather(const Tensor<T>& x, Shape out_shape, const IndexMap& index);

}  // namespace hma::ops
