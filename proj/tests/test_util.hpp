#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hma/rng.hpp"
#include "hma/tensor.hpp"

namespace hma::test {

template <typename T>
Tensor<T> randn(Shape shape, uint64_t seed, double std = 1.0) {
  Rng rng(seed);
  return rng.normal_tensor<T>(std::move(shape), std);
}

template <typename T>
Tensor<T> make(Shape shape, std::vector<T> v) {
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
void expect_close(const Tensor<T>& a, const Tensor<T>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (int64_t i = 0; i < a.numel(); ++i) ASSERT_NEAR(a[i], b[i], tol) << "at flat index " << i;
}

}  // namespace hma::test
