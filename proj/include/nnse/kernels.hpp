#pragma once

// Concrete layer kernels. `serial` is the reference implementation kept for
// testing; `parallel` splits independent output elements across OpenMP
// threads. Each output element is accumulated in ascending flat index order
// in both variants, so their results are bit-identical.

#include <cstddef>
#include <cstdint>
#include <span>

#include "nnse/model.hpp"

namespace nnse::kernels {

struct DenseGeometry {
  std::size_t inputs = 0;
  std::size_t units = 0;
};

/// Conv2D (valid padding) or MaxPool2D window geometry over an [h,w,c] input.
struct WindowGeometry {
  std::size_t in_h = 0, in_w = 0, in_c = 0;
  std::size_t win_h = 0, win_w = 0;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t out_h = 0, out_w = 0;
  std::size_t out_c = 0;  // filters for conv, in_c for pooling

  static WindowGeometry for_layer(const LayerSpec& layer, const TensorShape& input);
  std::size_t input_offset(std::size_t y, std::size_t x, std::size_t c) const { return (y * in_w + x) * in_c + c; }
  std::size_t output_offset(std::size_t y, std::size_t x, std::size_t c) const {
    return (y * out_w + x) * out_c + c;
  }
};

namespace serial {
void dense(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
           const DenseGeometry& g, std::span<double> out);
void conv2d(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
            const WindowGeometry& g, std::span<double> out);
void maxpool2d(std::span<const double> in, const WindowGeometry& g, std::span<double> out,
               std::span<std::uint32_t> choices);
void relu(std::span<const double> in, std::span<double> out, std::span<std::uint8_t> active);
}  // namespace serial

namespace parallel {
void dense(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
           const DenseGeometry& g, std::span<double> out);
void conv2d(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
            const WindowGeometry& g, std::span<double> out);
void maxpool2d(std::span<const double> in, const WindowGeometry& g, std::span<double> out,
               std::span<std::uint32_t> choices);
void relu(std::span<const double> in, std::span<double> out, std::span<std::uint8_t> active);
}  // namespace parallel

}  // namespace nnse::kernels
