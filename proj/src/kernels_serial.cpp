#include "nnse/kernels.hpp"

namespace nnse::kernels {

WindowGeometry WindowGeometry::for_layer(const LayerSpec& layer, const TensorShape& input) {
  WindowGeometry g;
  g.in_h = input[0];
  g.in_w = input[1];
  g.in_c = input[2];
  const bool conv = layer.kind == LayerKind::Conv2D;
  g.win_h = conv ? layer.kernel[0] : layer.pool[0];
  g.win_w = conv ? layer.kernel[1] : layer.pool[1];
  g.stride_h = layer.strides[0];
  g.stride_w = layer.strides[1];
  g.out_h = (g.in_h - g.win_h) / g.stride_h + 1;
  g.out_w = (g.in_w - g.win_w) / g.stride_w + 1;
  g.out_c = conv ? layer.filters : g.in_c;
  return g;
}

namespace serial {

void dense(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
           const DenseGeometry& g, std::span<double> out) {
  for (std::size_t j = 0; j < g.units; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.inputs; ++i) acc += in[i] * weights[i * g.units + j];
    out[j] = acc + biases[j];
  }
}

void conv2d(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
            const WindowGeometry& g, std::span<double> out) {
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      for (std::size_t f = 0; f < g.out_c; ++f) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < g.win_h; ++ky) {
          for (std::size_t kx = 0; kx < g.win_w; ++kx) {
            for (std::size_t c = 0; c < g.in_c; ++c) {
              const std::size_t w = ((ky * g.win_w + kx) * g.in_c + c) * g.out_c + f;
              acc += in[g.input_offset(oy * g.stride_h + ky, ox * g.stride_w + kx, c)] * weights[w];
            }
          }
        }
        out[g.output_offset(oy, ox, f)] = acc + biases[f];
      }
    }
  }
}

void maxpool2d(std::span<const double> in, const WindowGeometry& g, std::span<double> out,
               std::span<std::uint32_t> choices) {
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      for (std::size_t c = 0; c < g.out_c; ++c) {
        std::uint32_t best = 0;
        double best_value = in[g.input_offset(oy * g.stride_h, ox * g.stride_w, c)];
        for (std::size_t py = 0; py < g.win_h; ++py) {
          for (std::size_t px = 0; px < g.win_w; ++px) {
            const double v = in[g.input_offset(oy * g.stride_h + py, ox * g.stride_w + px, c)];
            if (v > best_value) {
              best_value = v;
              best = static_cast<std::uint32_t>(py * g.win_w + px);
            }
          }
        }
        const std::size_t o = g.output_offset(oy, ox, c);
        out[o] = best_value;
        choices[o] = best;
      }
    }
  }
}

void relu(std::span<const double> in, std::span<double> out, std::span<std::uint8_t> active) {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const bool on = in[i] > 0.0;
    out[i] = on ? in[i] : 0.0;
    active[i] = on ? 1 : 0;
  }
}

}  // namespace serial
}  // namespace nnse::kernels
