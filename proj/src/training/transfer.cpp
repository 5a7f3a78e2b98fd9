#include "hma/training.hpp"

namespace hma {

std::string TransferReport::summary() const {
  std::string out = "copied " + std::to_string(copied.size()) + " tensors, reinitialized " +
                    std::to_string(reinitialized.size()) + "\n";
  for (const auto& n : reinitialized) out += "  reinit " + n + "\n";
  return out;
}

HmaModel<float> transfer_parameters(const Checkpoint& src, const HmaConfig& dst, uint64_t seed,
                                    TransferReport* report) {
  HmaModel<float> model(dst, seed);
  TransferReport local;
  for (auto& p : model.params()) {
    if (src.params.contains(p.name) && src.params.at(p.name).value.shape() == p.value.shape()) {
      p.value = src.params.at(p.name).value;
      local.copied.push_back(p.name);
    } else {
      local.reinitialized.push_back(p.name);
    }
  }
  if (report) *report = std::move(local);
  return model;
}

}  // namespace hma
