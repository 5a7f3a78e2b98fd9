#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hma/tensor.hpp"

namespace hma {

template <typename T>
struct Param {
  std::string name;  // dot-separated path, unique within its store
  Tensor<T> value;
  std::optional<Tensor<T>> grad;
};

/// Named parameters in insertion order. References returned by add()/at()
/// stay valid for the lifetime of the store.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(std::string name, Tensor<T> value);
  bool contains(std::string_view name) const;
  const Param<T>& at(std::string_view name) const;
  Param<T>& at(std::string_view name);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  size_t size() const { return params_.size(); }

  int64_t scalar_count() const;
  void zero_grad();
  std::vector<std::string> names() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::deque<Param<T>> params_;
  std::unordered_map<std::string, size_t> index_;
};

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
class Var {
 public:
  Var() = default;
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int64_t dim(int axis) const { return value().dim(axis); }
  int rank() const { return value().rank(); }
  Tape<T>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

/// View handed to an operation's adjoint. grad_input(k) returns the running
/// gradient buffer of input k; adjoints must add into it, never overwrite,
/// because the same value may feed several inputs.
template <typename T>
class BackwardContext {
 public:
  std::span<const T> grad_output() const { return grad_out_; }
  const Tensor<T>& output() const;
  const Tensor<T>& input(size_t k) const;
  bool needs_grad(size_t k) const;
  std::span<T> grad_input(size_t k);

 private:
  friend class Tape<T>;
  BackwardContext(Tape<T>& tape, int node, std::span<const T> grad_out)
      : tape_(tape), node_(node), grad_out_(grad_out) {}
  Tape<T>& tape_;
  int node_;
  std::span<const T> grad_out_;
};

/// Reverse-mode recorder. One forward/backward pass owns a tape; it is not
/// shared across threads. With gradients disabled it only holds values.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(BackwardContext<T>&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  /// Differentiable leaf that is not a parameter (e.g. an input for grad checks).
  Var<T> input(Tensor<T> value);
  /// Leaf bound to store[name]; repeated calls return the same node.
  Var<T> param(ParamStore<T>& store, const std::string& name);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward);

  /// Propagates d loss / d node back to every leaf. Parameter gradients are
  /// added into Param::grad.
  void backward(const Var<T>& loss);
  std::optional<Tensor<T>> grad(const Var<T>& v) const;

  bool grad_enabled() const { return grad_enabled_; }
  bool requires_grad(const Var<T>& v) const;
  const Tensor<T>& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t size() const { return nodes_.size(); }

 private:
  friend class BackwardContext<T>;
  struct Node {
    Tensor<T> value;
    std::vector<int> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool leaf = false;
    Param<T>* param = nullptr;
  };
  Var<T> push(Node node);
  void check_owned(const Var<T>& v, const char* what) const;

  std::deque<Node> nodes_;  // deque keeps value() references stable
  std::vector<std::vector<T>> grads_;
  std::map<const Param<T>*, int> param_nodes_;
  bool grad_enabled_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;
extern template class BackwardContext<float>;
extern template class BackwardContext<double>;

}  // namespace hma
