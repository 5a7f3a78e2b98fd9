#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hma/imaging.hpp"
#include "hma/model.hpp"

namespace hma {

struct TrainConfig {
  int64_t total_iters = 2000;
  int batch = 4;
  double lr0 = 2e-4;
  std::vector<int64_t> milestones{1500};
  int patch_lr = 16;
  uint64_t seed = 0;
  bool augment = true;
  int64_t log_every = 10;
};

/// Throws ConfigError unless milestones are strictly increasing and below total_iters.
void validate(const TrainConfig& cfg);

/// 800K iterations, batch 32, 64 x 64 patches, halved at 300K/500K/650K/700K/750K.
TrainConfig preset_pretrain();
/// 250K iterations at 5e-6, halved at 125K/200K/230K/240K.
TrainConfig preset_finetune();
/// 2000 iterations at 2e-4, halved at 1500.
TrainConfig preset_toy();
TrainConfig preset_by_name(const std::string& name);

/// lr0 * 2^-(number of milestones <= iter).
double lr_at(int64_t iter, const TrainConfig& cfg);

template <typename T>
struct OptimizerState {
  std::map<std::string, std::vector<T>> m, v;
  int64_t t = 0;
};

/// Bias-corrected Adam, beta1 = 0.9, beta2 = 0.99, eps = 1e-8, no weight decay.
/// Every parameter must hold a gradient.
template <typename T>
void adam_step(ParamStore<T>& params, OptimizerState<T>& state, double lr);

struct Checkpoint {
  HmaConfig config;
  ParamStore<float> params;
  std::optional<OptimizerState<float>> optimizer;
  uint64_t iteration = 0;
};

std::vector<uint8_t> serialize_checkpoint(const HmaConfig& cfg, const ParamStore<float>& params,
                                          const OptimizerState<float>* optimizer, uint64_t iteration);
/// `source` names the data in diagnostics.
Checkpoint parse_checkpoint(const std::vector<uint8_t>& bytes, const std::string& source);
/// Written to a temporary file and renamed into place.
void save_checkpoint(const std::string& path, const HmaConfig& cfg, const ParamStore<float>& params,
                     const OptimizerState<float>* optimizer, uint64_t iteration);
Checkpoint load_checkpoint(const std::string& path);

/// Full images with their bicubic-degraded counterparts; hr is exactly scale x lr.
struct Dataset {
  int scale = 2;
  std::vector<std::string> names;
  std::vector<ImageF32> hr, lr;
};

/// Every PNG/PPM in `dir`, sorted by file name; HR is cropped to a multiple of scale.
Dataset load_dataset(const std::string& dir, int scale);
Dataset synthetic_dataset(int count, int hr_size, int scale, uint64_t seed);

/// N x 3 x p x p LR and N x 3 x sp x sp HR tensors.
struct Batch {
  Tensor<float> lr, hr;
};
/// Batch for one iteration; depends only on (cfg.seed, iter).
Batch sample_batch(const Dataset& data, const TrainConfig& cfg, int64_t iter);

struct LossRecord {
  int64_t iter;
  double loss;
  double lr;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_log;
  /// Called after each milestone iteration and after the last one.
  std::function<void(int64_t iter)> on_checkpoint;
};

/// Runs from state.t to cfg.total_iters. Throws NumericError on a non-finite loss.
std::vector<LossRecord> train_loop(HmaModel<float>& model, OptimizerState<float>& state, const Dataset& data,
                                   const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Mean Y-channel PSNR of the model over the full training images.
double dataset_psnr(HmaModel<float>& model, const Dataset& data, int crop);

struct TransferReport {
  std::vector<std::string> copied;
  std::vector<std::string> reinitialized;
  std::string summary() const;
};

/// Copies every same-name, same-shape parameter from `src`; initializes the rest with `seed`.
HmaModel<float> transfer_parameters(const Checkpoint& src, const HmaConfig& dst, uint64_t seed,
                                    TransferReport* report = nullptr);

}  // namespace hma
