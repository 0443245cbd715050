#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nnse/tensor.hpp"

namespace nnse {

enum class LayerKind { Conv2D, Dense, ReLU, MaxPool2D, Flatten, Softmax };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

using Pair = std::array<std::size_t, 2>;

/// One layer of the architecture. Only the fields relevant to `kind` are
/// meaningful; the named constructors fill them consistently.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t filters = 0;  // Conv2D
  std::size_t units = 0;    // Dense
  Pair kernel{0, 0};        // Conv2D
  Pair pool{0, 0};          // MaxPool2D
  Pair strides{1, 1};       // Conv2D, MaxPool2D
  std::string weights_file;
  std::string biases_file;

  bool has_params() const noexcept { return kind == LayerKind::Conv2D || kind == LayerKind::Dense; }

  static LayerSpec conv2d(std::size_t filters, Pair kernel, Pair strides = {1, 1});
  static LayerSpec dense(std::size_t units);
  static LayerSpec relu();
  static LayerSpec maxpool2d(Pair pool, Pair strides);
  static LayerSpec flatten();
  static LayerSpec softmax();

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::string name;
  TensorShape input_shape;
  std::vector<LayerSpec> layers;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Output shape of every layer, in order. Throws ShapeMismatch when a layer
/// cannot accept its input and InvalidModel for structural problems (no
/// layers, Softmax not last).
std::vector<TensorShape> infer_shapes(const ModelSpec& spec);

/// Weight tensor shape a parameterised layer needs for the given input shape:
/// Conv2D [kh,kw,in_ch,filters], Dense [in,out].
TensorShape expected_weights_shape(const LayerSpec& layer, const TensorShape& input);
TensorShape expected_biases_shape(const LayerSpec& layer);

struct LayerParams {
  Tensor weights;
  Tensor biases;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Validated, immutable network. params()[i] is empty for layers without
/// parameters.
class Model {
 public:
  Model(ModelSpec spec, std::vector<LayerParams> params);

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerParams>& params() const noexcept { return params_; }
  const LayerParams& params(std::size_t layer) const { return params_.at(layer); }
  const LayerSpec& layer(std::size_t i) const { return spec_.layers.at(i); }
  std::size_t layer_count() const noexcept { return spec_.layers.size(); }

  const TensorShape& input_shape() const noexcept { return spec_.input_shape; }
  const TensorShape& input_shape_of(std::size_t layer) const;
  const TensorShape& output_shape_of(std::size_t layer) const { return shapes_.at(layer); }
  const std::vector<TensorShape>& output_shapes() const noexcept { return shapes_; }

  bool has_softmax() const noexcept;
  /// Number of layers that produce logits (all layers except a final Softmax).
  std::size_t logits_depth() const noexcept;
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  ModelSpec spec_;
  std::vector<LayerParams> params_;
  std::vector<TensorShape> shapes_;
};

ModelSpec parse_model_spec(std::string_view json_text);
std::string serialize_model_spec(const ModelSpec& spec);

/// Reads `model.json` plus the raw little-endian float64 parameter files it
/// references. Each file is read with a single bulk read.
Model load_model(const std::filesystem::path& dir);

/// Writes `model.json` and one .bin file per parameter tensor. Layers with
/// empty file names get `layer<i>_weights.bin` / `layer<i>_biases.bin`.
void save_model(const Model& model, const std::filesystem::path& dir);

}  // namespace nnse
