#include "nnse/forward.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "nnse/error.hpp"
#include "nnse/kernels.hpp"

namespace nnse {

std::size_t ActivationPattern::relu_neuron_count() const noexcept {
  std::size_t n = 0;
  for (const auto& r : relu) n += r.active.size();
  return n;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

namespace {

void check_finite(const Tensor& t, std::size_t layer) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw Error(ErrorCode::NonFiniteActivation,
                  "layer " + std::to_string(layer) + " output " + std::to_string(i) + " is not finite");
    }
  }
}

template <typename Dense, typename Conv, typename Pool, typename Relu>
ForwardResult run(const Model& model, const Tensor& input, Dense dense, Conv conv, Pool pool, Relu relu) {
  if (input.shape() != model.input_shape()) {
    throw Error(ErrorCode::ShapeMismatch,
                "input shape " + input.shape().to_string() + ", model expects " + model.input_shape().to_string());
  }
  check_finite(input, 0);

  ForwardResult result;
  Tensor current = input;
  for (std::size_t i = 0; i < model.logits_depth(); ++i) {
    const LayerSpec& layer = model.layer(i);
    Tensor next(model.output_shape_of(i));
    switch (layer.kind) {
      case LayerKind::Dense: {
        const auto& p = model.params(i);
        dense(current.data(), p.weights.data(), p.biases.data(),
              kernels::DenseGeometry{current.size(), layer.units}, next.data());
        break;
      }
      case LayerKind::Conv2D: {
        const auto& p = model.params(i);
        conv(current.data(), p.weights.data(), p.biases.data(),
             kernels::WindowGeometry::for_layer(layer, current.shape()), next.data());
        break;
      }
      case LayerKind::MaxPool2D: {
        ActivationPattern::Pool rec{i, std::vector<std::uint32_t>(next.size())};
        pool(current.data(), kernels::WindowGeometry::for_layer(layer, current.shape()), next.data(),
             std::span<std::uint32_t>(rec.choice));
        result.pattern.pool.push_back(std::move(rec));
        break;
      }
      case LayerKind::ReLU: {
        ActivationPattern::Relu rec{i, std::vector<std::uint8_t>(next.size())};
        relu(current.data(), next.data(), std::span<std::uint8_t>(rec.active));
        result.pattern.relu.push_back(std::move(rec));
        break;
      }
      case LayerKind::Flatten:
        std::copy(current.data().begin(), current.data().end(), next.data().begin());
        break;
      case LayerKind::Softmax:
        break;
    }
    check_finite(next, i);
    current = std::move(next);
  }

  Prediction& pred = result.prediction;
  pred.label = argmax(current.data());
  if (model.has_softmax()) {
    pred.probabilities = Tensor(current.shape(), softmax(current.data()));
  }
  pred.logits = std::move(current);
  return result;
}

}  // namespace

ForwardResult forward(const Model& model, const Tensor& input, Backend backend) {
  if (backend == Backend::Serial) {
    return run(model, input, kernels::serial::dense, kernels::serial::conv2d, kernels::serial::maxpool2d,
               kernels::serial::relu);
  }
  return run(model, input, kernels::parallel::dense, kernels::parallel::conv2d, kernels::parallel::maxpool2d,
             kernels::parallel::relu);
}

double evaluate_dataset(const Model& model, std::span<const Tensor> inputs, std::span<const std::size_t> labels) {
  if (inputs.empty()) throw Error(ErrorCode::EmptyDataset, "no inputs to evaluate");
  if (inputs.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(inputs.size()) + " inputs but " +
                                              std::to_string(labels.size()) + " labels");
  }
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
  std::size_t correct = 0;
  std::exception_ptr failure;
#pragma omp parallel for reduction(+ : correct) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      if (forward(model, inputs[i], Backend::Serial).prediction.label == labels[i]) ++correct;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return static_cast<double>(correct) / static_cast<double>(inputs.size());
}

}  // namespace nnse
