#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace nnse {

/// Channels-last dimension list, e.g. {28, 28, 1}. Every dim is >= 1 and the
/// list is never empty.
class TensorShape {
 public:
  TensorShape() = default;
  TensorShape(std::initializer_list<std::size_t> dims);
  explicit TensorShape(std::vector<std::size_t> dims);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  std::size_t element_count() const noexcept;

  /// Row-major flat offset of a multi-index. Throws ShapeMismatch when the
  /// index has the wrong rank or is out of range.
  std::size_t flat_index(std::span<const std::size_t> index) const;

  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Shaped, row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorShape shape);
  Tensor(TensorShape shape, std::vector<double> data);

  const TensorShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  TensorShape shape_;
  std::vector<double> data_;
};

}  // namespace nnse
