#include "nnse/tensor.hpp"

#include <functional>
#include <numeric>

#include "nnse/error.hpp"

namespace nnse {

TensorShape::TensorShape(std::initializer_list<std::size_t> dims)
    : TensorShape(std::vector<std::size_t>(dims)) {}

TensorShape::TensorShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw Error(ErrorCode::ShapeMismatch, "tensor shape must have at least one dim");
  for (std::size_t d : dims_) {
    if (d == 0) throw Error(ErrorCode::ShapeMismatch, "tensor dims must be >= 1, got " + to_string());
  }
}

std::size_t TensorShape::element_count() const noexcept {
  if (dims_.empty()) return 0;
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t TensorShape::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "index of rank " + std::to_string(index.size()) + " into shape " + to_string());
  }
  std::size_t flat = 0;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (index[i] >= dims_[i]) {
      throw Error(ErrorCode::ShapeMismatch, "index out of range for shape " + to_string());
    }
    flat = flat * dims_[i] + index[i];
  }
  return flat;
}

std::string TensorShape::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(dims_[i]);
  }
  return out + "]";
}

Tensor::Tensor(TensorShape shape) : shape_(std::move(shape)), data_(shape_.element_count(), 0.0) {}

Tensor::Tensor(TensorShape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.element_count()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor of shape " + shape_.to_string() + " needs " +
                                              std::to_string(shape_.element_count()) + " values, got " +
                                              std::to_string(data_.size()));
  }
}

}  // namespace nnse
