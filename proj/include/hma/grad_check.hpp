#pragma once

// Central finite-difference oracle for Tape gradients, f64 only.

#include <functional>
#include <string>
#include <vector>

#include "hma/autograd.hpp"

namespace hma {

struct GradCheckResult {
  double max_rel_error = 0.0;  // |analytic - numeric| / max(1, |analytic|)
  std::string worst;           // "<name>[<flat index>]" of the worst coordinate
  int64_t checked = 0;
};

using InputFn = std::function<Var<double>(Tape<double>&, const Var<double>&)>;
using ParamFn = std::function<Var<double>(Tape<double>&)>;

/// Checks d f / d x. `coords` restricts the flat indices checked; empty means all.
GradCheckResult grad_check(const InputFn& f, const Tensor<double>& x, double h = 1e-5,
                           const std::vector<int64_t>& coords = {});

/// Checks d f / d p for every parameter in `store`, sampling up to
/// `per_param` coordinates of each (all of them when the tensor is smaller).
/// Parameter values are restored before returning.
GradCheckResult grad_check_params(const ParamFn& f, ParamStore<double>& store, double h = 1e-5,
                                  int per_param = 2, uint64_t seed = 0);

}  // namespace hma
