#include <algorithm>
#include <array>

#include "nnse/kernels.hpp"

namespace nnse::kernels::parallel {

namespace {
constexpr std::size_t kUnitBlock = 16;
}

void dense(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
           const DenseGeometry& g, std::span<double> out) {
  const auto blocks = static_cast<std::ptrdiff_t>((g.units + kUnitBlock - 1) / kUnitBlock);
  // Blocked over output units so the weight rows are read contiguously; every
  // unit still sums its inputs in ascending order.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t j0 = static_cast<std::size_t>(b) * kUnitBlock;
    const std::size_t j1 = std::min(g.units, j0 + kUnitBlock);
    std::array<double, kUnitBlock> acc{};
    for (std::size_t i = 0; i < g.inputs; ++i) {
      const double x = in[i];
      const double* row = weights.data() + i * g.units;
      for (std::size_t j = j0; j < j1; ++j) acc[j - j0] += x * row[j];
    }
    for (std::size_t j = j0; j < j1; ++j) out[j] = acc[j - j0] + biases[j];
  }
}

void conv2d(std::span<const double> in, std::span<const double> weights, std::span<const double> biases,
            const WindowGeometry& g, std::span<double> out) {
  const auto rows = static_cast<std::ptrdiff_t>(g.out_h * g.out_w);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t oy = static_cast<std::size_t>(r) / g.out_w;
    const std::size_t ox = static_cast<std::size_t>(r) % g.out_w;
    double* dst = out.data() + g.output_offset(oy, ox, 0);
    std::fill(dst, dst + g.out_c, 0.0);
    for (std::size_t ky = 0; ky < g.win_h; ++ky) {
      for (std::size_t kx = 0; kx < g.win_w; ++kx) {
        const double* src = in.data() + g.input_offset(oy * g.stride_h + ky, ox * g.stride_w + kx, 0);
        const double* wk = weights.data() + (ky * g.win_w + kx) * g.in_c * g.out_c;
        for (std::size_t c = 0; c < g.in_c; ++c) {
          const double x = src[c];
          const double* wrow = wk + c * g.out_c;
          for (std::size_t f = 0; f < g.out_c; ++f) dst[f] += x * wrow[f];
        }
      }
    }
    for (std::size_t f = 0; f < g.out_c; ++f) dst[f] += biases[f];
  }
}

void maxpool2d(std::span<const double> in, const WindowGeometry& g, std::span<double> out,
               std::span<std::uint32_t> choices) {
  const auto rows = static_cast<std::ptrdiff_t>(g.out_h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t oy_ = 0; oy_ < rows; ++oy_) {
    const auto oy = static_cast<std::size_t>(oy_);
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
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const bool on = in[i] > 0.0;
    out[i] = on ? in[i] : 0.0;
    active[i] = on ? 1 : 0;
  }
}

}  // namespace nnse::kernels::parallel
