#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hma {

using Shape = std::vector<int64_t>;

/// Raised when operand shapes violate an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated file contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or documents.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
int64_t numel(const Shape& shape);

/// Dense row-major array. The buffer is shared and never mutated once the
/// tensor exists, so copies are cheap and safe to hand across threads.
/// Feature maps use NCHW; token sequences use (..., tokens, channels).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  /// Negative axes count from the end.
  int64_t dim(int axis) const;
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

  std::span<const T> data() const { return {data_->data(), data_->size()}; }
  const T* ptr() const { return data_->data(); }
  T operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }
  T item() const;

  /// Same buffer, new shape; element count must match.
  Tensor reshape(Shape shape) const;
  std::vector<T> to_vector() const { return *data_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_->begin(), data_->end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<T>> data_;
};

/// Largest |a - b| over all elements; shapes must match.
template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
bool all_finite(const Tensor<T>& t);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace hma
