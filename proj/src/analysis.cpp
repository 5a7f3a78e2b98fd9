#include "hma/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "hma/kernels.hpp"

namespace hma {

FeatureMatrix::FeatureMatrix(int64_t r, int64_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (r < 1 || c < 1 || static_cast<int64_t>(values.size()) != r * c) {
    throw ShapeError("feature matrix " + std::to_string(r) + " x " + std::to_string(c) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
}

namespace {

/// Centers columns in place; returns false when every column is constant.
bool center(std::vector<double>& v, int64_t n, int64_t p) {
  double raw = 0.0, centered = 0.0;
  for (int64_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += v[static_cast<size_t>(i * p + j)];
    mean /= static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      double& e = v[static_cast<size_t>(i * p + j)];
      raw += e * e;
      e -= mean;
      centered += e * e;
    }
  }
  return centered > 1e-24 * raw && centered > 0.0;
}

double frobenius_of_gram(const std::vector<double>& a, int64_t pa, const std::vector<double>& b, int64_t pb,
                         int64_t n) {
  std::vector<double> g(static_cast<size_t>(pa * pb));
  kernels::gemm<double>(true, false, pa, pb, n, 1.0, a.data(), pa, b.data(), pb, 0.0, g.data(), pb);
  double s = 0.0;
  for (double e : g) s += e * e;
  return s;
}

}  // namespace

double linear_cka(const FeatureMatrix& x, const FeatureMatrix& y) {
  if (x.rows != y.rows) {
    throw ShapeError("linear_cka: row counts differ (" + std::to_string(x.rows) + " vs " + std::to_string(y.rows) +
                     ")");
  }
  if (x.rows < 2) throw ShapeError("linear_cka needs at least 2 samples");
  std::vector<double> a = x.values, b = y.values;
  if (!center(a, x.rows, x.cols) || !center(b, y.rows, y.cols)) return 0.0;
  const double yx = frobenius_of_gram(b, y.cols, a, x.cols, x.rows);
  const double xx = std::sqrt(frobenius_of_gram(a, x.cols, a, x.cols, x.rows));
  const double yy = std::sqrt(frobenius_of_gram(b, y.cols, b, y.cols, y.rows));
  if (xx == 0.0 || yy == 0.0) return 0.0;
  return yx / (xx * yy);
}

std::vector<std::string> available_layers(HmaModel<float>& model, const Tensor<float>& probe) {
  std::vector<std::string> out;
  Capture<float> cap = [&](const std::string& path, const Var<float>&) { out.push_back(path); };
  Tape<float> tape(false);
  model.forward(tape, tape.constant(probe), &cap);
  return out;
}

std::map<std::string, FeatureMatrix> capture_features(HmaModel<float>& model, const Tensor<float>& probe,
                                                      const std::vector<std::string>& selectors) {
  const std::set<std::string> wanted(selectors.begin(), selectors.end());
  std::map<std::string, FeatureMatrix> out;
  std::vector<std::string> seen;
  Capture<float> cap = [&](const std::string& path, const Var<float>& v) {
    seen.push_back(path);
    if (!wanted.count(path)) return;
    const int64_t cols = v.dim(-1);
    const auto data = v.value().data();
    out[path] = FeatureMatrix(v.value().numel() / cols, cols, std::vector<double>(data.begin(), data.end()));
  };
  Tape<float> tape(false);
  model.forward(tape, tape.constant(probe), &cap);
  for (const auto& s : selectors) {
    if (!out.count(s)) {
      std::string list;
      for (const auto& p : seen) list += "\n  " + p;
      throw std::invalid_argument("unknown layer selector '" + s + "'; available:" + list);
    }
  }
  return out;
}

std::string CkaReport::to_csv() const {
  std::string out = "layer";
  for (const auto& c : col_labels) out += "," + c;
  out += "\n";
  char buf[32];
  for (size_t r = 0; r < row_labels.size(); ++r) {
    out += row_labels[r];
    for (size_t c = 0; c < col_labels.size(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.6f", at(r, c));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

CkaReport cka_grid(const std::vector<std::string>& row_labels, const std::vector<FeatureMatrix>& rows,
                   const std::vector<std::string>& col_labels, const std::vector<FeatureMatrix>& cols) {
  if (row_labels.size() != rows.size() || col_labels.size() != cols.size()) {
    throw std::invalid_argument("cka_grid: label and matrix counts differ");
  }
  CkaReport r{row_labels, col_labels, {}};
  r.values.reserve(rows.size() * cols.size());
  for (const auto& a : rows)
    for (const auto& b : cols) r.values.push_back(linear_cka(a, b));
  return r;
}

}  // namespace hma
