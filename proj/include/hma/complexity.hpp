#pragma once

#include <string>
#include <vector>

#include "hma/config.hpp"

namespace hma {

struct ComplexityItem {
  std::string module;  // submodule family, summed over every RHTB / FAB
  int64_t params = 0;
  int64_t macs = 0;
};

struct ComplexityReport {
  int64_t params = 0;
  int64_t macs = 0;  // multiply-adds of conv, linear and attention matmuls
  std::vector<ComplexityItem> items;
};

/// Parameters by enumeration of param_specs(cfg); multiply-adds analytically
/// for one height x width low-resolution input.
ComplexityReport count_params_macs(const HmaConfig& cfg, int64_t height, int64_t width);

/// Fixed-width table. With reference totals, adds a delta column per total.
std::string format_report(const ComplexityReport& r, int64_t ref_params = 0, int64_t ref_macs = 0);

}  // namespace hma
