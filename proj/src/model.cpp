#include "nnse/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "nnse/error.hpp"

namespace nnse {

using nlohmann::json;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::Dense: return "dense";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool2D: return "maxpool2d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (LayerKind k : {LayerKind::Conv2D, LayerKind::Dense, LayerKind::ReLU, LayerKind::MaxPool2D,
                      LayerKind::Flatten, LayerKind::Softmax}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::MalformedJson, "unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(std::size_t filters, Pair kernel, Pair strides) {
  LayerSpec l;
  l.kind = LayerKind::Conv2D;
  l.filters = filters;
  l.kernel = kernel;
  l.strides = strides;
  return l;
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool2d(Pair pool, Pair strides) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool2D;
  l.pool = pool;
  l.strides = strides;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::Softmax;
  return l;
}

namespace {

[[noreturn]] void shape_error(std::size_t layer, const std::string& expected, const std::string& found) {
  throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(layer) + ": expected " + expected +
                                            ", found " + found);
}

std::size_t window_out(std::size_t in, std::size_t window, std::size_t stride) {
  return (in - window) / stride + 1;
}

TensorShape layer_output(std::size_t index, const LayerSpec& layer, const TensorShape& in) {
  switch (layer.kind) {
    case LayerKind::Conv2D:
    case LayerKind::MaxPool2D: {
      const bool conv = layer.kind == LayerKind::Conv2D;
      const Pair win = conv ? layer.kernel : layer.pool;
      if (in.rank() != 3) shape_error(index, "rank-3 [h,w,c] input", in.to_string());
      if (win[0] == 0 || win[1] == 0 || layer.strides[0] == 0 || layer.strides[1] == 0) {
        throw Error(ErrorCode::InvalidModel, "layer " + std::to_string(index) + ": window and strides must be >= 1");
      }
      if (conv && layer.filters == 0) {
        throw Error(ErrorCode::InvalidModel, "layer " + std::to_string(index) + ": conv2d needs filters >= 1");
      }
      if (win[0] > in[0] || win[1] > in[1]) {
        shape_error(index, "spatial dims >= window [" + std::to_string(win[0]) + "," + std::to_string(win[1]) + "]",
                    in.to_string());
      }
      return TensorShape{window_out(in[0], win[0], layer.strides[0]), window_out(in[1], win[1], layer.strides[1]),
                         conv ? layer.filters : in[2]};
    }
    case LayerKind::Dense:
      if (in.rank() != 1) shape_error(index, "rank-1 input (add a flatten layer)", in.to_string());
      if (layer.units == 0) throw Error(ErrorCode::InvalidModel, "layer " + std::to_string(index) + ": dense needs units >= 1");
      return TensorShape{layer.units};
    case LayerKind::Flatten:
      return TensorShape{in.element_count()};
    case LayerKind::ReLU:
    case LayerKind::Softmax:
      return in;
  }
  throw Error(ErrorCode::InvalidModel, "bad layer kind");
}

}  // namespace

std::vector<TensorShape> infer_shapes(const ModelSpec& spec) {
  if (spec.layers.empty()) throw Error(ErrorCode::InvalidModel, "model has no layers");
  if (spec.input_shape.rank() == 0) throw Error(ErrorCode::ShapeMismatch, "model has no input shape");
  std::vector<TensorShape> shapes;
  shapes.reserve(spec.layers.size());
  const TensorShape* current = &spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind == LayerKind::Softmax && i + 1 != spec.layers.size()) {
      throw Error(ErrorCode::InvalidModel, "softmax may only be the final layer (found at layer " +
                                               std::to_string(i) + ")");
    }
    shapes.push_back(layer_output(i, spec.layers[i], *current));
    current = &shapes.back();
  }
  return shapes;
}

TensorShape expected_weights_shape(const LayerSpec& layer, const TensorShape& input) {
  if (layer.kind == LayerKind::Conv2D) return TensorShape{layer.kernel[0], layer.kernel[1], input[2], layer.filters};
  if (layer.kind == LayerKind::Dense) return TensorShape{input.element_count(), layer.units};
  throw Error(ErrorCode::InvalidArgument, "layer kind has no weights");
}

TensorShape expected_biases_shape(const LayerSpec& layer) {
  if (layer.kind == LayerKind::Conv2D) return TensorShape{layer.filters};
  if (layer.kind == LayerKind::Dense) return TensorShape{layer.units};
  throw Error(ErrorCode::InvalidArgument, "layer kind has no biases");
}

Model::Model(ModelSpec spec, std::vector<LayerParams> params)
    : spec_(std::move(spec)), params_(std::move(params)), shapes_(infer_shapes(spec_)) {
  if (params_.size() != spec_.layers.size()) {
    throw Error(ErrorCode::InvalidModel, "expected one parameter slot per layer");
  }
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    LayerSpec& layer = spec_.layers[i];
    const LayerParams& p = params_[i];
    if (!layer.has_params()) {
      if (p.weights.size() != 0 || p.biases.size() != 0) {
        throw Error(ErrorCode::InvalidModel, "layer " + std::to_string(i) + " takes no parameters");
      }
      layer.weights_file.clear();
      layer.biases_file.clear();
      continue;
    }
    if (layer.weights_file.empty()) layer.weights_file = "layer" + std::to_string(i) + "_weights.bin";
    if (layer.biases_file.empty()) layer.biases_file = "layer" + std::to_string(i) + "_biases.bin";
    const TensorShape w = expected_weights_shape(layer, input_shape_of(i));
    const TensorShape b = expected_biases_shape(layer);
    if (p.weights.shape() != w) shape_error(i, "weights " + w.to_string(), p.weights.shape().to_string());
    if (p.biases.shape() != b) shape_error(i, "biases " + b.to_string(), p.biases.shape().to_string());
    auto check_finite = [i](const Tensor& t, std::size_t base) {
      for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k])) {
          throw Error(ErrorCode::NonFiniteParameter,
                      "layer " + std::to_string(i) + " offset " + std::to_string(base + k));
        }
      }
    };
    check_finite(p.weights, 0);
    check_finite(p.biases, p.weights.size());
  }
}

const TensorShape& Model::input_shape_of(std::size_t layer) const {
  return layer == 0 ? spec_.input_shape : shapes_.at(layer - 1);
}

bool Model::has_softmax() const noexcept {
  return !spec_.layers.empty() && spec_.layers.back().kind == LayerKind::Softmax;
}

std::size_t Model::logits_depth() const noexcept { return layer_count() - (has_softmax() ? 1 : 0); }

std::size_t Model::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.weights.size() + p.biases.size();
  return n;
}

// ---------------------------------------------------------------------------
// model.json

namespace {

template <typename T>
T get_field(const json& obj, const char* key, std::size_t layer) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::MalformedJson, "layer " + std::to_string(layer) + " is missing '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedJson, "layer " + std::to_string(layer) + " field '" + key + "': " + e.what());
  }
}

Pair get_pair(const json& obj, const char* key, std::size_t layer) {
  auto v = get_field<std::vector<std::size_t>>(obj, key, layer);
  if (v.size() != 2) {
    throw Error(ErrorCode::MalformedJson, "layer " + std::to_string(layer) + " field '" + key + "' must have 2 entries");
  }
  return {v[0], v[1]};
}

}  // namespace

ModelSpec parse_model_spec(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::MalformedJson, "model.json must be an object");
  if (!doc.contains("input_shape") || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw Error(ErrorCode::MalformedJson, "model.json needs 'input_shape' and a 'layers' array");
  }
  ModelSpec spec;
  try {
    spec.name = doc.value("name", std::string{});
    spec.input_shape = TensorShape(doc["input_shape"].get<std::vector<std::size_t>>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedJson, e.what());
  }
  std::size_t index = 0;
  for (const json& entry : doc["layers"]) {
    if (!entry.is_object()) throw Error(ErrorCode::MalformedJson, "layer entries must be objects");
    LayerSpec layer;
    layer.kind = layer_kind_from_string(get_field<std::string>(entry, "kind", index));
    switch (layer.kind) {
      case LayerKind::Conv2D:
        layer.filters = get_field<std::size_t>(entry, "filters", index);
        layer.kernel = get_pair(entry, "kernel", index);
        layer.strides = entry.contains("strides") ? get_pair(entry, "strides", index) : Pair{1, 1};
        if (entry.contains("padding") && get_field<std::string>(entry, "padding", index) != "valid") {
          throw Error(ErrorCode::MalformedJson, "layer " + std::to_string(index) + ": only 'valid' padding is supported");
        }
        break;
      case LayerKind::Dense:
        layer.units = get_field<std::size_t>(entry, "units", index);
        break;
      case LayerKind::MaxPool2D:
        layer.pool = get_pair(entry, "pool", index);
        layer.strides = entry.contains("strides") ? get_pair(entry, "strides", index) : layer.pool;
        break;
      default:
        break;
    }
    if (layer.has_params()) {
      layer.weights_file = get_field<std::string>(entry, "weights_file", index);
      layer.biases_file = get_field<std::string>(entry, "biases_file", index);
    }
    spec.layers.push_back(std::move(layer));
    ++index;
  }
  return spec;
}

std::string serialize_model_spec(const ModelSpec& spec) {
  json doc;
  doc["name"] = spec.name;
  doc["input_shape"] = spec.input_shape.dims();
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) {
    json entry;
    entry["kind"] = std::string(to_string(l.kind));
    switch (l.kind) {
      case LayerKind::Conv2D:
        entry["filters"] = l.filters;
        entry["kernel"] = l.kernel;
        entry["strides"] = l.strides;
        entry["padding"] = "valid";
        break;
      case LayerKind::Dense:
        entry["units"] = l.units;
        break;
      case LayerKind::MaxPool2D:
        entry["pool"] = l.pool;
        entry["strides"] = l.strides;
        break;
      default:
        break;
    }
    if (l.has_params()) {
      entry["weights_file"] = l.weights_file;
      entry["biases_file"] = l.biases_file;
    }
    layers.push_back(std::move(entry));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// parameter files

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::string text;
  in.seekg(0, std::ios::end);
  text.resize(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  return text;
}

std::vector<double> read_doubles(const std::filesystem::path& path, std::size_t expected, std::size_t layer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(double)) {
    shape_error(layer, std::to_string(expected) + " float64 values (" + std::to_string(expected * 8) + " bytes) in " +
                           path.filename().string(),
                std::to_string(bytes) + " bytes");
  }
  std::vector<double> values(expected);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw Error(ErrorCode::IoError, "short read from " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (double& v : values) {
      auto raw = std::bit_cast<std::uint64_t>(v);
      raw = __builtin_bswap64(raw);
      v = std::bit_cast<double>(raw);
    }
  }
  return values;
}

void write_doubles(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    std::vector<std::uint64_t> swapped(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) swapped[i] = __builtin_bswap64(std::bit_cast<std::uint64_t>(values[i]));
    out.write(reinterpret_cast<const char*>(swapped.data()), static_cast<std::streamsize>(values.size() * 8));
  } else {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 8));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace

Model load_model(const std::filesystem::path& dir) {
  const auto json_path = dir / "model.json";
  if (!std::filesystem::exists(json_path)) throw Error(ErrorCode::MissingFile, json_path.string());
  ModelSpec spec = parse_model_spec(read_text(json_path));
  const std::vector<TensorShape> shapes = infer_shapes(spec);

  std::vector<LayerParams> params(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (!layer.has_params()) continue;
    const TensorShape& in = i == 0 ? spec.input_shape : shapes[i - 1];
    TensorShape wshape = expected_weights_shape(layer, in);
    TensorShape bshape = expected_biases_shape(layer);
    auto w = read_doubles(dir / layer.weights_file, wshape.element_count(), i);
    auto b = read_doubles(dir / layer.biases_file, bshape.element_count(), i);
    params[i] = LayerParams{Tensor(std::move(wshape), std::move(w)), Tensor(std::move(bshape), std::move(b))};
  }
  return Model(std::move(spec), std::move(params));
}

void save_model(const Model& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream out(dir / "model.json", std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "model.json").string());
    out << serialize_model_spec(model.spec());
  }
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const LayerSpec& layer = model.layer(i);
    if (!layer.has_params()) continue;
    write_doubles(dir / layer.weights_file, model.params(i).weights.data());
    write_doubles(dir / layer.biases_file, model.params(i).biases.data());
  }
}

}  // namespace nnse
