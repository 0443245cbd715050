#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nnse/model.hpp"
#include "nnse/tensor.hpp"

namespace nnse {

/// Branch outcomes along one concrete execution: for every ReLU layer the
/// per-neuron sign (1 iff the pre-activation is > 0), and for every max-pool
/// layer the in-window flat index selected per output (ties go to the lowest
/// index).
struct ActivationPattern {
  struct Relu {
    std::size_t layer = 0;
    std::vector<std::uint8_t> active;
    friend bool operator==(const Relu&, const Relu&) = default;
  };
  struct Pool {
    std::size_t layer = 0;
    std::vector<std::uint32_t> choice;
    friend bool operator==(const Pool&, const Pool&) = default;
  };

  std::vector<Relu> relu;
  std::vector<Pool> pool;

  std::size_t relu_neuron_count() const noexcept;

  friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

struct Prediction {
  Tensor logits;
  std::optional<Tensor> probabilities;  // present iff the model ends in softmax
  std::size_t label = 0;
};

struct ForwardResult {
  Prediction prediction;
  ActivationPattern pattern;
};

enum class Backend { Parallel, Serial };

/// Index of the largest value; the lowest index wins ties.
std::size_t argmax(std::span<const double> values);

/// Softmax with max-subtraction.
std::vector<double> softmax(std::span<const double> logits);

/// Layer-by-layer evaluation. Throws ShapeMismatch for a wrongly shaped input
/// and NonFiniteActivation if any layer produces NaN or Inf.
ForwardResult forward(const Model& model, const Tensor& input, Backend backend = Backend::Parallel);

/// Fraction of inputs whose predicted label equals the given label.
double evaluate_dataset(const Model& model, std::span<const Tensor> inputs, std::span<const std::size_t> labels);

}  // namespace nnse
