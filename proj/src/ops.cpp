#include "hma/ops.hpp"

namespace hma::ops {
namespace {

template <typename T>
std::optional<Var<T>> maybe(Tape<T>& tape, const std::optional<Tensor<T>>& t) {
  if (!t) return std::nullopt;
  return tape.constant(*t);
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const std::optional<Tensor<T>>& b, int stride, int pad,
                 Padding padding) {
  Tape<T> tape(false);
  return ag::conv2d(tape.constant(x), tape.constant(w), maybe(tape, b), stride, pad, padding).value();
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const std::optional<Tensor<T>>& b) {
  Tape<T> tape(false);
  return ag::linear(tape.constant(x), tape.constant(w), maybe(tape, b)).value();
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  Tape<T> tape(false);
  return ag::layer_norm(tape.constant(x), tape.constant(gamma), tape.constant(beta), eps).value();
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  Tape<T> tape(false);
  return ag::softmax_lastdim(tape.constant(x)).value();
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tape<T> tape(false);
  return ag::gelu(tape.constant(x)).value();
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  Tape<T> tape(false);
  return ag::pixel_shuffle(tape.constant(x), r).value();
}

template <typename T>
Tensor<T> gather(const Tensor<T>& x, Shape out_shape, const IndexMap& index) {
  Tape<T> tape(false);
  return ag::gather(tape.constant(x), std::move(out_shape), index).value();
}

#define HMA_INSTANTIATE(T)                                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&, int, int,   \
                            Padding);                                                                        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const std::optional<Tensor<T>>&);            \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);               \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                                                      \
  template Tensor<T> gelu(const Tensor<T>&);                                                                 \
  template Tensor<T> pixel_shuffle(const Tensor<T>&, int);                                                   \
  template Tensor<T> gather(const Tensor<T>&, Shape, const IndexMap&);

HMA_INSTANTIATE(float)
HMA_INSTANTIATE(double)
#undef HMA_INSTANTIATE

}  // namespace hma::ops
