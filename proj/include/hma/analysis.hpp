#pragma once

#include <map>
#include <string>
#include <vector>

#include "hma/model.hpp"

namespace hma {

/// Row-major samples x features.
struct FeatureMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(int64_t r, int64_t c, std::vector<double> v);
  double at(int64_t r, int64_t c) const { return values[static_cast<size_t>(r * cols + c)]; }
};

/// ||Y^T X||_F^2 / (||X^T X||_F ||Y^T Y||_F) on column-centered inputs; 0 when
/// either side has no variance.
double linear_cka(const FeatureMatrix& x, const FeatureMatrix& y);

/// Every activation path the model reports for a probe of this shape.
std::vector<std::string> available_layers(HmaModel<float>& model, const Tensor<float>& probe);

/// Activations flattened to rows = positions, cols = last axis. Unknown
/// selectors are rejected with the list of available paths.
std::map<std::string, FeatureMatrix> capture_features(HmaModel<float>& model, const Tensor<float>& probe,
                                                      const std::vector<std::string>& selectors);

struct CkaReport {
  std::vector<std::string> row_labels, col_labels;
  std::vector<double> values;  // row-major

  double at(size_t r, size_t c) const { return values[r * col_labels.size() + c]; }
  /// Header row of column labels, then one row per row label, 6 decimals.
  std::string to_csv() const;
};

CkaReport cka_grid(const std::vector<std::string>& row_labels, const std::vector<FeatureMatrix>& rows,
                   const std::vector<std::string>& col_labels, const std::vector<FeatureMatrix>& cols);

}  // namespace hma
