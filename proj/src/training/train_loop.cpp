#include <algorithm>
#include <cmath>

#include "hma/tiling.hpp"
#include "hma/training.hpp"

namespace hma {

std::vector<LossRecord> train_loop(HmaModel<float>& model, OptimizerState<float>& state, const Dataset& data,
                                   const TrainConfig& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (data.scale != model.config().scale) throw ConfigError("dataset scale differs from the model scale");
  std::vector<LossRecord> trace;
  auto& params = model.params();
  for (int64_t it = state.t; it < cfg.total_iters; ++it) {
    const Batch batch = sample_batch(data, cfg, it);
    Tape<float> tape;
    Var<float> pred = model.forward(tape, tape.constant(batch.lr));
    Var<float> loss = ag::l1_loss(pred, batch.hr);
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw NumericError("non-finite loss at iteration " + std::to_string(it));
    params.zero_grad();
    tape.backward(loss);
    const double lr = lr_at(it, cfg);
    adam_step(params, state, lr);
    const bool last = it + 1 == cfg.total_iters;
    if ((it + 1) % cfg.log_every == 0 || last) {
      trace.push_back({it + 1, value, lr});
      if (hooks.on_log) hooks.on_log(trace.back());
    }
    const bool milestone = std::find(cfg.milestones.begin(), cfg.milestones.end(), it + 1) != cfg.milestones.end();
    if ((milestone || last) && hooks.on_checkpoint) hooks.on_checkpoint(it + 1);
  }
  params.zero_grad();
  return trace;
}

double dataset_psnr(HmaModel<float>& model, const Dataset& data, int crop) {
  const HmaConfig& cfg = model.config();
  double total = 0.0;
  for (size_t i = 0; i < data.lr.size(); ++i) {
    const ImageF32& lr = data.lr[i];
    ImageF32 sr;
    if (lr.width % cfg.pad_multiple() == 0 && lr.height % cfg.pad_multiple() == 0 && lr.width <= cfg.img_size &&
        lr.height <= cfg.img_size) {
      sr = from_tensor(model.infer(to_tensor(lr)));
    } else {
      sr = tiled_inference(lr, model, cfg.img_size / cfg.pad_multiple() * cfg.pad_multiple(), cfg.pad_multiple());
    }
    total += psnr_y(sr, data.hr[i], crop);
  }
  return total / static_cast<double>(data.lr.size());
}

}  // namespace hma
