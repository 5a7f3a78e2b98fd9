#include "hma/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "hma/rng.hpp"

namespace hma {
namespace {

double scalar_of(const Var<double>& v) {
  if (v.value().numel() != 1) {
    throw ShapeError("grad_check needs a scalar-valued function, got shape " + to_string(v.shape()));
  }
  return v.value()[0];
}

Tensor<double> with_offset(const Tensor<double>& x, int64_t i, double delta) {
  std::vector<double> v = x.to_vector();
  v[static_cast<size_t>(i)] += delta;
  return Tensor<double>(x.shape(), std::move(v));
}

void record(GradCheckResult& r, double analytic, double numeric, const std::string& label) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
  ++r.checked;
  if (err > r.max_rel_error || r.worst.empty()) {
    r.max_rel_error = err;
    r.worst = label;
  }
}

}  // namespace

GradCheckResult grad_check(const InputFn& f, const Tensor<double>& x, double h, const std::vector<int64_t>& coords) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  Tensor<double> analytic;
  {
    Tape<double> tape;
    Var<double> xv = tape.input(x);
    Var<double> y = f(tape, xv);
    scalar_of(y);
    tape.backward(y);
    analytic = *tape.grad(xv);
  }
  auto eval = [&](const Tensor<double>& at) {
    Tape<double> tape(false);
    return scalar_of(f(tape, tape.constant(at)));
  };
  std::vector<int64_t> idx = coords;
  if (idx.empty()) {
    idx.resize(static_cast<size_t>(x.numel()));
    for (int64_t i = 0; i < x.numel(); ++i) idx[static_cast<size_t>(i)] = i;
  }
  GradCheckResult r;
  for (int64_t i : idx) {
    const double numeric = (eval(with_offset(x, i, h)) - eval(with_offset(x, i, -h))) / (2.0 * h);
    record(r, analytic[i], numeric, "x[" + std::to_string(i) + "]");
  }
  return r;
}

GradCheckResult grad_check_params(const ParamFn& f, ParamStore<double>& store, double h, int per_param,
                                  uint64_t seed) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  store.zero_grad();
  {
    Tape<double> tape;
    Var<double> y = f(tape);
    scalar_of(y);
    tape.backward(y);
  }
  auto eval = [&] {
    Tape<double> tape(false);
    return scalar_of(f(tape));
  };
  Rng rng(seed);
  GradCheckResult r;
  for (auto& p : store) {
    const Tensor<double> original = p.value;
    const Tensor<double> analytic = p.grad ? *p.grad : Tensor<double>::zeros(original.shape());
    std::vector<int64_t> idx;
    if (original.numel() <= per_param) {
      for (int64_t i = 0; i < original.numel(); ++i) idx.push_back(i);
    } else {
      for (int k = 0; k < per_param; ++k) idx.push_back(static_cast<int64_t>(rng.below(static_cast<uint64_t>(original.numel()))));
    }
    for (int64_t i : idx) {
      p.value = with_offset(original, i, h);
      const double plus = eval();
      p.value = with_offset(original, i, -h);
      const double minus = eval();
      p.value = original;
      record(r, analytic[i], (plus - minus) / (2.0 * h), p.name + "[" + std::to_string(i) + "]");
    }
  }
  store.zero_grad();
  return r;
}

}  // namespace hma
