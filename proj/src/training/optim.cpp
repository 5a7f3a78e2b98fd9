#include <cmath>

#include "hma/training.hpp"

namespace hma {

void validate(const TrainConfig& cfg) {
  if (cfg.total_iters < 1 || cfg.batch < 1 || cfg.patch_lr < 1 || cfg.log_every < 1) {
    throw ConfigError("train config: iterations, batch, patch size and log interval must be positive");
  }
  if (!(cfg.lr0 >= 0.0)) throw ConfigError("train config: lr0 must be non-negative");
  for (size_t i = 0; i < cfg.milestones.size(); ++i) {
    if (cfg.milestones[i] >= cfg.total_iters || (i > 0 && cfg.milestones[i] <= cfg.milestones[i - 1])) {
      throw ConfigError("train config: milestones must be strictly increasing and below total_iters");
    }
  }
}

TrainConfig preset_pretrain() {
  TrainConfig c;
  c.total_iters = 800'000;
  c.batch = 32;
  c.lr0 = 2e-4;
  c.milestones = {300'000, 500'000, 650'000, 700'000, 750'000};
  c.patch_lr = 64;
  c.log_every = 100;
  return c;
}

TrainConfig preset_finetune() {
  TrainConfig c = preset_pretrain();
  c.total_iters = 250'000;
  c.lr0 = 5e-6;
  c.milestones = {125'000, 200'000, 230'000, 240'000};
  return c;
}

TrainConfig preset_toy() { return TrainConfig{}; }

TrainConfig preset_by_name(const std::string& name) {
  if (name == "pretrain") return preset_pretrain();
  if (name == "finetune") return preset_finetune();
  if (name == "toy") return preset_toy();
  throw ConfigError("unknown preset '" + name + "' (expected pretrain, finetune or toy)");
}

double lr_at(int64_t iter, const TrainConfig& cfg) {
  int halvings = 0;
  for (int64_t m : cfg.milestones) halvings += m <= iter ? 1 : 0;
  return std::ldexp(cfg.lr0, -halvings);
}

template <typename T>
void adam_step(ParamStore<T>& params, OptimizerState<T>& state, double lr) {
  constexpr double b1 = 0.9, b2 = 0.99, eps = 1e-8;
  for (const auto& p : params) {
    if (!p.grad) throw std::invalid_argument("adam_step: parameter '" + p.name + "' has no gradient");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (auto& p : params) {
    const size_t n = static_cast<size_t>(p.value.numel());
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.empty()) m.assign(n, T(0));
    if (v.empty()) v.assign(n, T(0));
    std::vector<T> w = p.value.to_vector();
    const T* g = p.grad->ptr();
    for (size_t i = 0; i < n; ++i) {
      m[i] = static_cast<T>(b1 * m[i] + (1.0 - b1) * g[i]);
      v[i] = static_cast<T>(b2 * v[i] + (1.0 - b2) * g[i] * g[i]);
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] = static_cast<T>(w[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
    p.value = Tensor<T>(p.value.shape(), std::move(w));
  }
}

template void adam_step(ParamStore<float>&, OptimizerState<float>&, double);
template void adam_step(ParamStore<double>&, OptimizerState<double>&, double);

}  // namespace hma
