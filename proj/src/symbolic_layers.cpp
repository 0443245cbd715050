#include "symbolic_layers.hpp"

#include <algorithm>
#include <exception>

#include "nnse/error.hpp"
#include "nnse/kernels.hpp"

namespace nnse::detail {

namespace {

/// Per-thread sparse accumulator over variable indices.
class TermAccumulator {
 public:
  explicit TermAccumulator(std::size_t var_count) : coeff_(var_count, 0.0), seen_(var_count, 0) {}

  void add(VarIndex var, double c) {
    if (!seen_[var]) {
      seen_[var] = 1;
      coeff_[var] = c;
      touched_.push_back(var);
    } else {
      coeff_[var] += c;
    }
  }

  AffineExpr take(double constant) {
    std::sort(touched_.begin(), touched_.end());
    std::vector<Term> terms;
    terms.reserve(touched_.size());
    for (VarIndex v : touched_) {
      if (coeff_[v] != 0.0) terms.push_back(Term{v, coeff_[v]});
      seen_[v] = 0;
    }
    touched_.clear();
    return AffineExpr::from_terms(constant, std::move(terms));
  }

 private:
  std::vector<double> coeff_;
  std::vector<std::uint8_t> seen_;
  std::vector<VarIndex> touched_;
};

struct LayerInputs {
  std::vector<double> constants;
  std::vector<std::uint8_t> symbolic;
  bool any_symbolic = false;
};

LayerInputs split_inputs(const SymTensor& in) {
  LayerInputs li;
  li.constants.resize(in.size());
  li.symbolic.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    li.constants[i] = in[i].constant_term();
    li.symbolic[i] = in[i].is_constant() ? 0 : 1;
    li.any_symbolic = li.any_symbolic || li.symbolic[i];
  }
  return li;
}

const ParamVars* params_for(const ParamVars* params, std::size_t layer, const LayerInputs& li) {
  if (params == nullptr || params->empty() || params->layer != layer) return nullptr;
  if (li.any_symbolic) {
    throw Error(ErrorCode::NonlinearTerm,
                "layer " + std::to_string(layer) + " has symbolic parameters and symbolic inputs");
  }
  return params;
}

}  // namespace

SymTensor sym_dense(const Model& model, std::size_t layer, const SymTensor& in, const ParamVars* params,
                    std::size_t var_count) {
  const LayerSpec& spec = model.layer(layer);
  const auto w = model.params(layer).weights.data();
  const auto b = model.params(layer).biases.data();
  const LayerInputs li = split_inputs(in);
  const ParamVars* pv = params_for(params, layer, li);
  const std::size_t nin = in.size();
  const std::size_t units = spec.units;

  std::vector<std::size_t> symbolic_inputs;
  for (std::size_t i = 0; i < nin; ++i) {
    if (li.symbolic[i]) symbolic_inputs.push_back(i);
  }

  SymTensor out(units);
  std::exception_ptr failure;
#pragma omp parallel
  {
    TermAccumulator acc_terms(var_count);
#pragma omp for schedule(static)
    for (std::ptrdiff_t j_ = 0; j_ < static_cast<std::ptrdiff_t>(units); ++j_) {
      const auto j = static_cast<std::size_t>(j_);
      try {
        double acc = 0.0;
        for (std::size_t i = 0; i < nin; ++i) {
          const std::size_t wi = i * units + j;
          if (pv && pv->var_of[wi] >= 0) {
            acc_terms.add(static_cast<VarIndex>(pv->var_of[wi]), li.constants[i]);
            continue;
          }
          acc += li.constants[i] * w[wi];
        }
        for (std::size_t i : symbolic_inputs) {
          const double wij = w[i * units + j];
          if (wij == 0.0) continue;
          for (const Term& t : in[i].terms()) acc_terms.add(t.var, t.coeff * wij);
        }
        double bias = b[j];
        if (pv && pv->var_of[w.size() + j] >= 0) {
          acc_terms.add(static_cast<VarIndex>(pv->var_of[w.size() + j]), 1.0);
          bias = 0.0;
        }
        out[j] = acc_terms.take(acc + bias);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

SymTensor sym_conv2d(const Model& model, std::size_t layer, const SymTensor& in, const ParamVars* params,
                     std::size_t var_count) {
  const LayerSpec& spec = model.layer(layer);
  const auto g = kernels::WindowGeometry::for_layer(spec, model.input_shape_of(layer));
  const auto w = model.params(layer).weights.data();
  const auto b = model.params(layer).biases.data();
  const LayerInputs li = split_inputs(in);
  const ParamVars* pv = params_for(params, layer, li);

  SymTensor out(g.out_h * g.out_w * g.out_c);
  const auto positions = static_cast<std::ptrdiff_t>(g.out_h * g.out_w);
  std::exception_ptr failure;
#pragma omp parallel
  {
    TermAccumulator acc_terms(var_count);
#pragma omp for schedule(static)
    for (std::ptrdiff_t p = 0; p < positions; ++p) {
      const std::size_t oy = static_cast<std::size_t>(p) / g.out_w;
      const std::size_t ox = static_cast<std::size_t>(p) % g.out_w;
      try {
        for (std::size_t f = 0; f < g.out_c; ++f) {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < g.win_h; ++ky) {
            for (std::size_t kx = 0; kx < g.win_w; ++kx) {
              for (std::size_t c = 0; c < g.in_c; ++c) {
                const std::size_t ii = g.input_offset(oy * g.stride_h + ky, ox * g.stride_w + kx, c);
                const std::size_t wi = ((ky * g.win_w + kx) * g.in_c + c) * g.out_c + f;
                if (pv && pv->var_of[wi] >= 0) {
                  acc_terms.add(static_cast<VarIndex>(pv->var_of[wi]), li.constants[ii]);
                  continue;
                }
                acc += li.constants[ii] * w[wi];
                if (li.symbolic[ii] && w[wi] != 0.0) {
                  for (const Term& t : in[ii].terms()) acc_terms.add(t.var, t.coeff * w[wi]);
                }
              }
            }
          }
          double bias = b[f];
          if (pv && pv->var_of[w.size() + f] >= 0) {
            acc_terms.add(static_cast<VarIndex>(pv->var_of[w.size() + f]), 1.0);
            bias = 0.0;
          }
          out[g.output_offset(oy, ox, f)] = acc_terms.take(acc + bias);
        }
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<std::size_t> pool_window(const Model& model, std::size_t layer, std::size_t out_index) {
  const auto g = kernels::WindowGeometry::for_layer(model.layer(layer), model.input_shape_of(layer));
  const std::size_t c = out_index % g.out_c;
  const std::size_t ox = (out_index / g.out_c) % g.out_w;
  const std::size_t oy = out_index / (g.out_c * g.out_w);
  std::vector<std::size_t> window;
  window.reserve(g.win_h * g.win_w);
  for (std::size_t py = 0; py < g.win_h; ++py) {
    for (std::size_t px = 0; px < g.win_w; ++px) {
      window.push_back(g.input_offset(oy * g.stride_h + py, ox * g.stride_w + px, c));
    }
  }
  return window;
}

}  // namespace nnse::detail

namespace nnse::detail {

std::vector<std::vector<std::size_t>> pool_windows(const Model& model, std::size_t layer) {
  const std::size_t n = model.output_shape_of(layer).element_count();
  std::vector<std::vector<std::size_t>> windows(n);
  for (std::size_t o = 0; o < n; ++o) windows[o] = pool_window(model, layer, o);
  return windows;
}

}  // namespace nnse::detail
