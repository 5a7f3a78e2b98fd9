#include "hma/autograd.hpp"

#include <algorithm>

namespace hma {

template <typename T>
Param<T>& ParamStore<T>::add(std::string name, Tensor<T> value) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Param<T>{std::move(name), std::move(value), std::nullopt});
  return params_.back();
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

template <typename T>
const Param<T>& ParamStore<T>::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + std::string(name) + "'");
  return params_[it->second];
}

template <typename T>
Param<T>& ParamStore<T>::at(std::string_view name) {
  return const_cast<Param<T>&>(std::as_const(*this).at(name));
}

template <typename T>
int64_t ParamStore<T>::scalar_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p.grad.reset();
}

template <typename T>
std::vector<std::string> ParamStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
const Tensor<T>& BackwardContext<T>::output() const {
  return tape_.nodes_[static_cast<size_t>(node_)].value;
}

template <typename T>
const Tensor<T>& BackwardContext<T>::input(size_t k) const {
  const int id = tape_.nodes_[static_cast<size_t>(node_)].inputs.at(k);
  return tape_.nodes_[static_cast<size_t>(id)].value;
}

template <typename T>
bool BackwardContext<T>::needs_grad(size_t k) const {
  const int id = tape_.nodes_[static_cast<size_t>(node_)].inputs.at(k);
  return tape_.nodes_[static_cast<size_t>(id)].requires_grad;
}

template <typename T>
std::span<T> BackwardContext<T>::grad_input(size_t k) {
  const int id = tape_.nodes_[static_cast<size_t>(node_)].inputs.at(k);
  auto& node = tape_.nodes_[static_cast<size_t>(id)];
  if (!node.requires_grad) return {};
  auto& g = tape_.grads_[static_cast<size_t>(id)];
  if (g.empty()) g.assign(static_cast<size_t>(node.value.numel()), T(0));
  return {g.data(), g.size()};
}

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<int>(nodes_.size() - 1));
}

template <typename T>
void Tape<T>::check_owned(const Var<T>& v, const char* what) const {
  if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument(std::string(what) + ": value is not recorded on this tape");
  }
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::input(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::param(ParamStore<T>& store, const std::string& name) {
  Param<T>* p = &store.at(name);
  if (auto it = param_nodes_.find(p); it != param_nodes_.end()) return Var<T>(this, it->second);
  Node n;
  n.value = p->value;
  n.leaf = true;
  n.requires_grad = grad_enabled_;
  n.param = p;
  Var<T> v = push(std::move(n));
  param_nodes_.emplace(p, v.id_);
  return v;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    check_owned(in, "record");
    n.inputs.push_back(in.id_);
    n.requires_grad = n.requires_grad || nodes_[static_cast<size_t>(in.id_)].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

template <typename T>
bool Tape<T>::requires_grad(const Var<T>& v) const {
  check_owned(v, "requires_grad");
  return nodes_[static_cast<size_t>(v.id_)].requires_grad;
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  check_owned(loss, "backward");
  const auto& root = nodes_[static_cast<size_t>(loss.id_)];
  if (root.value.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + to_string(root.value.shape()));
  }
  if (!root.requires_grad) throw std::invalid_argument("backward: loss does not depend on any differentiable value");

  grads_.assign(nodes_.size(), {});
  grads_[static_cast<size_t>(loss.id_)] = {T(1)};
  for (int i = loss.id_; i >= 0; --i) {
    auto& node = nodes_[static_cast<size_t>(i)];
    auto& g = grads_[static_cast<size_t>(i)];
    if (g.empty()) continue;
    if (node.backward) {
      BackwardContext<T> ctx(*this, i, std::span<const T>(g.data(), g.size()));
      node.backward(ctx);
    }
    if (node.param) {
      Param<T>& p = *node.param;
      if (p.grad) {
        std::vector<T> acc = p.grad->to_vector();
        for (size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
        p.grad = Tensor<T>(p.value.shape(), std::move(acc));
      } else {
        p.grad = Tensor<T>(p.value.shape(), g);
      }
    }
    if (!node.leaf) std::vector<T>().swap(g);
  }
}

template <typename T>
std::optional<Tensor<T>> Tape<T>::grad(const Var<T>& v) const {
  check_owned(v, "grad");
  if (static_cast<size_t>(v.id_) >= grads_.size()) return std::nullopt;
  const auto& g = grads_[static_cast<size_t>(v.id_)];
  if (g.empty()) {
    if (!nodes_[static_cast<size_t>(v.id_)].requires_grad) return std::nullopt;
    return Tensor<T>::zeros(nodes_[static_cast<size_t>(v.id_)].value.shape());
  }
  return Tensor<T>(nodes_[static_cast<size_t>(v.id_)].value.shape(), g);
}

template class ParamStore<float>;
template class ParamStore<double>;
template class Var<float>;
template class Var<double>;
template class BackwardContext<float>;
template class BackwardContext<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace hma
