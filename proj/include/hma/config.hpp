#pragma once

#include <string>

#include "hma/ag_ops.hpp"

namespace hma {

struct HmaConfig {
  int scale = 4;
  int in_channels = 3;
  int channels = 180;
  int window = 16;         // M, window attention side
  int grid_interval = 4;   // K
  int n_rhtb = 6;
  int n_fab = 6;
  int heads_fab = 6;
  int heads_gab_grid = 3;
  int heads_gab_win = 3;
  int expansion_rate = 6;
  int shrink_rate = 2;     // SE bottleneck width = expanded channels / shrink_rate
  double mlp_ratio = 2.0;
  int img_size = 64;       // largest training input side; sizes the grid bias table
  bool legacy_grid_scale = false;
  Padding conv_padding = Padding::kZero;

  int expanded_channels() const { return channels * expansion_rate; }
  int se_channels() const { return expanded_channels() / shrink_rate; }
  int mlp_hidden() const { return static_cast<int>(channels * mlp_ratio); }
  /// Side of the grid bias table: groups up to this extent are supported.
  int grid_extent() const { return img_size / grid_interval; }
  /// Spatial granularity inputs must be padded to.
  int pad_multiple() const;

  bool operator==(const HmaConfig&) const = default;
};

/// Throws ConfigError naming the first violated constraint.
void validate(const HmaConfig& cfg);

HmaConfig paper_config(int scale = 4);
/// C=32, 2 RHTB x 2 FAB, M=8, K=2.
HmaConfig toy_config(int scale = 2);
/// Smallest useful network, for fast unit tests.
HmaConfig tiny_config(int scale = 2);

/// JSON text; unknown keys are rejected, missing keys keep paper defaults.
HmaConfig config_from_json(const std::string& text);
std::string config_to_json(const HmaConfig& cfg);
HmaConfig load_config(const std::string& path);

}  // namespace hma
