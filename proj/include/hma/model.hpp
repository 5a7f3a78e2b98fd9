#pragma once

#include <string>
#include <vector>

#include "hma/attention.hpp"
#include "hma/config.hpp"
#include "hma/rng.hpp"

namespace hma {

enum class Init {
  kTruncNormal,  // N(0, 0.02) truncated at 2 sigma
  kConvUniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  kZeros,
  kOnes,
};

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
};

/// Every parameter of the network in creation order.
std::vector<ParamSpec> param_specs(const HmaConfig& cfg);

template <typename T>
Tensor<T> init_tensor(const ParamSpec& spec, Rng& rng);

/// Forward-pass state shared by the block functions below. Parameter names
/// are "<prefix>.<local>"; captured activations are reported under the same
/// dotted paths.
template <typename T>
struct Scope {
  Tape<T>& tape;
  ParamStore<T>& store;
  const HmaConfig& cfg;
  const Capture<T>* capture = nullptr;

  Var<T> p(const std::string& name) const { return tape.param(store, name); }
  void emit(const std::string& path, const Var<T>& v) const {
    if (capture && *capture) (*capture)(path, v);
  }
};

// Blocks on N x H x W x C token maps.
template <typename T>
Var<T> fused_conv_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
template <typename T>
Var<T> stl_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x, bool shifted);
template <typename T>
Var<T> fab_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
template <typename T>
Var<T> mal_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
template <typename T>
Var<T> gab_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
template <typename T>
Var<T> rhtb_forward(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
/// N x C_in x H x W -> N x C_in x sH x sW.
template <typename T>
Var<T> hma_forward(const Scope<T>& s, const Var<T>& img);

/// Attention parameters "<prefix>.{q,k,v,proj}.{weight,bias}" and "<prefix>.bias_table".
template <typename T>
AttentionVars<T> attention_vars(const Scope<T>& s, const std::string& prefix, int heads);
template <typename T>
Var<T> layer_norm(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
template <typename T>
Var<T> linear(const Scope<T>& s, const std::string& prefix, const Var<T>& x);
template <typename T>
Var<T> conv3x3(const Scope<T>& s, const std::string& prefix, const Var<T>& x);

template <typename T>
class HmaModel {
 public:
  /// Freshly initialized parameters.
  explicit HmaModel(HmaConfig cfg, uint64_t seed = 0);
  /// Adopts `params`, which must match param_specs(cfg) in names and shapes.
  HmaModel(HmaConfig cfg, ParamStore<T> params);

  const HmaConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  Var<T> forward(Tape<T>& tape, const Var<T>& img, const Capture<T>* capture = nullptr);
  /// Gradient-free forward of an N x C_in x H x W batch.
  Tensor<T> infer(const Tensor<T>& img);

 private:
  HmaConfig cfg_;
  ParamStore<T> params_;
};

/// Checks spatial dims against the model's padding granularity and bias-table extent.
void check_input_geometry(const HmaConfig& cfg, int64_t height, int64_t width);

extern template class HmaModel<float>;
extern template class HmaModel<double>;

}  // namespace hma
