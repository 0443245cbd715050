#pragma once

// Affine propagation through the linear layers (internal).

#include <cstdint>
#include <vector>

#include "nnse/affine.hpp"
#include "nnse/model.hpp"

namespace nnse::detail {

using SymTensor = std::vector<AffineExpr>;

/// var_of[offset] for the symbolic parameters of one layer, -1 where concrete.
struct ParamVars {
  std::size_t layer = 0;
  std::vector<std::int64_t> var_of;
  bool empty() const noexcept { return var_of.empty(); }
};

SymTensor sym_dense(const Model& model, std::size_t layer, const SymTensor& in, const ParamVars* params,
                    std::size_t var_count);
SymTensor sym_conv2d(const Model& model, std::size_t layer, const SymTensor& in, const ParamVars* params,
                     std::size_t var_count);

/// Input flat indices of pooling window `out_index`, in window order.
std::vector<std::size_t> pool_window(const Model& model, std::size_t layer, std::size_t out_index);

}  // namespace nnse::detail

namespace nnse::detail {
/// pool_window for every output of the layer.
std::vector<std::vector<std::size_t>> pool_windows(const Model& model, std::size_t layer);
}  // namespace nnse::detail
