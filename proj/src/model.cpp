// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/model.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace inferdb {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2D: return "conv2d";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Embedding: return "embedding";
  }
  return "unknown";
}

std::string FlowShape::text() const {
  if (!spatial) return std::to_string(width);
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
}

namespace {

[[noreturn]] void layer_error(int index, const std::string& message) {
  raise(ErrorKind::LoadError, "layer " + std::to_string(index) + ": " + message);
}

void check_weight_dims(int index, const Layer& layer, const FlowShape& in) {
  switch (layer.kind) {
    case LayerKind::Dense:
      if (layer.weights.rank() != 2 || layer.weights.rows() != layer.units ||
          layer.weights.cols() != in.width) {
        layer_error(index, "dense weights must be " + std::to_string(layer.units) + "x" +
                               std::to_string(in.width) + ", got " +
                               std::to_string(layer.weights.rank() == 2 ? layer.weights.rows() : -1) +
                               "x" +
                               std::to_string(layer.weights.rank() == 2 ? layer.weights.cols() : -1));
      }
      if (layer.bias.rank() != 1 || layer.bias.size() != layer.units) {
        layer_error(index, "dense bias must have " + std::to_string(layer.units) + " entries");
      }
      break;
    case LayerKind::Conv2D:
      if (layer.weights.rank() != 4 || layer.weights.dim(0) != layer.out_channels ||
          layer.weights.dim(1) != layer.kernel_h || layer.weights.dim(2) != layer.kernel_w ||
          layer.weights.dim(3) != in.c) {
        layer_error(index, "conv kernels must be " + std::to_string(layer.out_channels) + "x" +
                               std::to_string(layer.kernel_h) + "x" +
                               std::to_string(layer.kernel_w) + "x" + std::to_string(in.c));
      }
      if (layer.bias.rank() != 1 || layer.bias.size() != layer.out_channels) {
        layer_error(index,
                    "conv bias must have " + std::to_string(layer.out_channels) + " entries");
      }
      break;
    case LayerKind::Embedding:
      if (layer.weights.rank() != 2 || layer.weights.rows() != layer.dict_size ||
          layer.weights.cols() != layer.dim) {
        layer_error(index, "embedding table must be " + std::to_string(layer.dict_size) + "x" +
                               std::to_string(layer.dim));
      }
      break;
    case LayerKind::Flatten:
      break;
  }
}

}  // namespace

std::vector<LayerDiagnostic> validate_model(const Model& m, int64_t batch_size) {
  if (batch_size < 1) raise(ErrorKind::InvalidArgument, "batch size must be positive");
  std::vector<LayerDiagnostic> out;
  out.reserve(m.layers.size());
  FlowShape shape = m.input;
  if (shape.elements() <= 0) {
    raise(ErrorKind::LoadError, "model '" + m.name + "' declares an empty input shape");
  }
  for (size_t li = 0; li < m.layers.size(); ++li) {
    const Layer& layer = m.layers[li];
    int index = static_cast<int>(li);
    LayerDiagnostic diag;
    diag.index = index;
    diag.kind = layer.kind;
    diag.in_shape = shape;
    switch (layer.kind) {
      case LayerKind::Dense: {
        if (shape.spatial) {
          layer_error(index, "dense layer expects a flat input, got " + shape.text() +
                                 "; insert a flatten layer");
        }
        if (layer.units <= 0) layer_error(index, "dense units must be positive");
        diag.param_count = layer.units * shape.width + layer.units;
        diag.weight_bytes = layer.units * shape.width * 8;
        diag.bias_bytes = layer.units * 8;
        diag.est_bytes = matmul_est_bytes(batch_size, shape.width, layer.units);
        shape = FlowShape::flat(layer.units);
        break;
      }
      case LayerKind::Conv2D: {
        if (!shape.spatial) {
          layer_error(index, "conv layer expects a spatial input, got width " + shape.text());
        }
        if (layer.out_channels <= 0 || layer.kernel_h <= 0 || layer.kernel_w <= 0) {
          layer_error(index, "conv dimensions must be positive");
        }
        if (shape.h < layer.kernel_h || shape.w < layer.kernel_w) {
          layer_error(index, "kernel " + std::to_string(layer.kernel_h) + "x" +
                                 std::to_string(layer.kernel_w) + " exceeds input " + shape.text());
        }
        int64_t fcols = layer.kernel_h * layer.kernel_w * shape.c + 1;
        int64_t out_h = shape.h - layer.kernel_h + 1;
        int64_t out_w = shape.w - layer.kernel_w + 1;
        diag.param_count = layer.out_channels * fcols;  // the +1 column carries the bias
        diag.weight_bytes = layer.out_channels * (fcols - 1) * 8;
        diag.bias_bytes = layer.out_channels * 8;
        diag.est_bytes = matmul_est_bytes(batch_size * out_h * out_w, fcols, layer.out_channels);
        shape = FlowShape::volume(out_h, out_w, layer.out_channels);
        break;
      }
      case LayerKind::Flatten: {
        if (!shape.spatial) {
          layer_error(index, "flatten expects a spatial input, got width " + shape.text());
        }
        int64_t width = shape.elements();
        diag.est_bytes = 2 * batch_size * width * 8;
        shape = FlowShape::flat(width);
        break;
      }
      case LayerKind::Embedding: {
        if (shape.spatial) {
          layer_error(index, "embedding expects a flat id list, got " + shape.text());
        }
        if (layer.dict_size <= 0 || layer.dim <= 0) {
          layer_error(index, "embedding dict_size and dim must be positive");
        }
        int64_t out_width =
            layer.reduce == EmbedReduce::Sum ? layer.dim : shape.width * layer.dim;
        diag.param_count = layer.dict_size * layer.dim;
        diag.weight_bytes = layer.dict_size * layer.dim * 8;
        diag.est_bytes =
            (batch_size * shape.width + layer.dict_size * layer.dim + batch_size * out_width) * 8;
        shape = FlowShape::flat(out_width);
        break;
      }
    }
    if (m.weights_loaded) check_weight_dims(index, layer, diag.in_shape);
    diag.out_shape = shape;
    out.push_back(diag);
  }
  return out;
}

FlowShape Model::output_shape() const {
  if (layers.empty()) return input;
  return validate_model(*this, 1).back().out_shape;
}

namespace {

DenseTensor read_weight_file(int layer_index, const fs::path& path,
                             std::vector<int64_t> shape) {
  int64_t elems = 1;
  for (int64_t d : shape) elems *= d;
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) layer_error(layer_index, "cannot open weight file " + path.string());
  int64_t bytes = static_cast<int64_t>(in.tellg());
  if (bytes != elems * 8) {
    layer_error(layer_index, "weight file " + path.string() + " holds " + std::to_string(bytes) +
                                 " bytes, expected exactly " + std::to_string(elems * 8));
  }
  std::vector<double> data(static_cast<size_t>(elems));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(data.data()), elems * 8);
  if (!in) layer_error(layer_index, "short read from weight file " + path.string());
  return DenseTensor(std::move(shape), std::move(data));
}

void write_weight_file(const fs::path& path, const DenseTensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(t.raw()), t.size() * 8);
  if (!out) raise(ErrorKind::IoError, "short write to " + path.string());
}

int64_t require_int(const json& doc, const char* field, int layer_index) {
  if (!doc.contains(field) || !doc[field].is_number_integer()) {
    layer_error(layer_index, std::string("missing or non-integer field '") + field + "'");
  }
  return doc[field].get<int64_t>();
}

std::string require_file(const json& doc, const char* field, const char* alias, int layer_index) {
  for (const char* name : {field, alias}) {
    if (name && doc.contains(name)) {
      if (!doc[name].is_string()) layer_error(layer_index, std::string("field '") + name + "' must be a file name");
      return doc[name].get<std::string>();
    }
  }
  layer_error(layer_index, std::string("missing field '") + field + "'");
}

Model parse_model_document(const std::string& name, const json& doc, bool expect_weights) {
  if (!doc.is_object()) raise(ErrorKind::LoadError, "manifest root must be an object");
  Model m;
  m.name = name;
  if (m.name.empty() && doc.contains("name")) m.name = doc["name"].get<std::string>();
  if (m.name.empty()) raise(ErrorKind::LoadError, "model has no name");

  bool has_dim = doc.contains("input_dim"), has_shape = doc.contains("input_shape");
  if (has_dim == has_shape) {
    raise(ErrorKind::LoadError,
          "manifest must declare exactly one of input_dim or input_shape");
  }
  if (has_dim) {
    m.input = FlowShape::flat(doc["input_dim"].get<int64_t>());
  } else {
    const json& s = doc["input_shape"];
    if (!s.is_array() || s.size() != 3) {
      raise(ErrorKind::LoadError, "input_shape must be [H, W, C]");
    }
    m.input = FlowShape::volume(s[0].get<int64_t>(), s[1].get<int64_t>(), s[2].get<int64_t>());
  }
  if (!doc.contains("layers") || !doc["layers"].is_array()) {
    raise(ErrorKind::LoadError, "manifest must declare a layers array");
  }

  int index = 0;
  for (const json& jl : doc["layers"]) {
    Layer layer;
    if (!jl.contains("type") || !jl["type"].is_string()) {
      layer_error(index, "missing layer type");
    }
    std::string type = jl["type"].get<std::string>();
    if (type == "dense") {
      layer.kind = LayerKind::Dense;
      layer.units = require_int(jl, "units", index);
    } else if (type == "conv2d") {
      layer.kind = LayerKind::Conv2D;
      layer.out_channels = require_int(jl, "out_channels", index);
      layer.kernel_h = require_int(jl, "kernel_h", index);
      layer.kernel_w = require_int(jl, "kernel_w", index);
    } else if (type == "flatten") {
      layer.kind = LayerKind::Flatten;
    } else if (type == "embedding") {
      layer.kind = LayerKind::Embedding;
      layer.dict_size = require_int(jl, "dict_size", index);
      layer.dim = require_int(jl, "dim", index);
      if (jl.contains("reduce")) {
        std::string reduce = jl["reduce"].get<std::string>();
        if (reduce == "sum") {
          layer.reduce = EmbedReduce::Sum;
        } else if (reduce == "none") {
          layer.reduce = EmbedReduce::None;
        } else {
          layer_error(index, "unknown reduce '" + reduce + "'");
        }
      }
    } else {
      layer_error(index, "unknown layer type '" + type + "'");
    }
    if (jl.contains("activation")) {
      layer.activation = activation_from_name(jl["activation"].get<std::string>());
    }
    if (expect_weights && layer.kind != LayerKind::Flatten) {
      layer.weights_file = require_file(jl, "weights", "kernels", index);
      if (layer.kind != LayerKind::Embedding) {
        layer.bias_file = require_file(jl, "bias", nullptr, index);
      }
    }
    m.layers.push_back(std::move(layer));
    ++index;
  }
  return m;
}

}  // namespace

Model load_model_manifest(const std::string& manifest_path, bool bind_weights) {
  std::ifstream in(manifest_path);
  if (!in) raise(ErrorKind::LoadError, "cannot open manifest " + manifest_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorKind::LoadError, "manifest " + manifest_path + " is not well-formed: " + e.what());
  }
  Model m = parse_model_document("", doc, bind_weights);

  if (bind_weights) {
    fs::path base = fs::path(manifest_path).parent_path();
    FlowShape shape = m.input;
    // Track the chain while binding so each file is read at its exact
    // declared size; validate_model afterwards re-checks the full contract.
    for (size_t li = 0; li < m.layers.size(); ++li) {
      Layer& layer = m.layers[li];
      int index = static_cast<int>(li);
      switch (layer.kind) {
        case LayerKind::Dense:
          if (shape.spatial) layer_error(index, "dense layer expects a flat input");
          layer.weights = read_weight_file(index, base / layer.weights_file,
                                           {layer.units, shape.width});
          layer.bias = read_weight_file(index, base / layer.bias_file, {layer.units});
          shape = FlowShape::flat(layer.units);
          break;
        case LayerKind::Conv2D:
          if (!shape.spatial) layer_error(index, "conv layer expects a spatial input");
          layer.weights =
              read_weight_file(index, base / layer.weights_file,
                               {layer.out_channels, layer.kernel_h, layer.kernel_w, shape.c});
          layer.bias = read_weight_file(index, base / layer.bias_file, {layer.out_channels});
          shape = FlowShape::volume(shape.h - layer.kernel_h + 1, shape.w - layer.kernel_w + 1,
                                    layer.out_channels);
          break;
        case LayerKind::Flatten:
          if (!shape.spatial) layer_error(index, "flatten expects a spatial input");
          shape = FlowShape::flat(shape.elements());
          break;
        case LayerKind::Embedding:
          layer.weights =
              read_weight_file(index, base / layer.weights_file, {layer.dict_size, layer.dim});
          shape = FlowShape::flat(layer.reduce == EmbedReduce::Sum ? layer.dim
                                                                   : shape.width * layer.dim);
          break;
      }
    }
    m.weights_loaded = true;
  }
  validate_model(m, 1);
  return m;
}

Model model_from_metadata(const std::string& name, const std::string& metadata) {
  std::string text = metadata;
  if (!text.empty() && text[0] == '@') {
    std::ifstream in(text.substr(1));
    if (!in) raise(ErrorKind::LoadError, "cannot open metadata file " + text.substr(1));
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorKind::LoadError, std::string("metadata is not well-formed: ") + e.what());
  }
  Model m = parse_model_document(name, doc, /*expect_weights=*/false);
  validate_model(m, 1);
  return m;
}

void save_model(const Model& m, const std::string& dir) {
  if (!m.weights_loaded) raise(ErrorKind::InvalidArgument, "cannot save a shape-only model");
  fs::create_directories(dir);
  fs::path base(dir);
  json doc;
  doc["name"] = m.name;
  if (m.input.spatial) {
    doc["input_shape"] = {m.input.h, m.input.w, m.input.c};
  } else {
    doc["input_dim"] = m.input.width;
  }
  doc["layers"] = json::array();
  for (size_t li = 0; li < m.layers.size(); ++li) {
    const Layer& layer = m.layers[li];
    std::string stem = "l" + std::to_string(li);
    json jl;
    jl["type"] = std::string(to_string(layer.kind));
    switch (layer.kind) {
      case LayerKind::Dense:
        jl["units"] = layer.units;
        jl["activation"] = std::string(to_string(layer.activation));
        jl["weights"] = stem + "_w.bin";
        jl["bias"] = stem + "_b.bin";
        write_weight_file(base / (stem + "_w.bin"), layer.weights);
        write_weight_file(base / (stem + "_b.bin"), layer.bias);
        break;
      case LayerKind::Conv2D:
        jl["out_channels"] = layer.out_channels;
        jl["kernel_h"] = layer.kernel_h;
        jl["kernel_w"] = layer.kernel_w;
        jl["activation"] = std::string(to_string(layer.activation));
        jl["weights"] = stem + "_w.bin";
        jl["bias"] = stem + "_b.bin";
        write_weight_file(base / (stem + "_w.bin"), layer.weights);
        write_weight_file(base / (stem + "_b.bin"), layer.bias);
        break;
      case LayerKind::Flatten:
        break;
      case LayerKind::Embedding:
        jl["dict_size"] = layer.dict_size;
        jl["dim"] = layer.dim;
        jl["reduce"] = layer.reduce == EmbedReduce::Sum ? "sum" : "none";
        jl["weights"] = stem + "_w.bin";
        write_weight_file(base / (stem + "_w.bin"), layer.weights);
        break;
    }
    doc["layers"].push_back(std::move(jl));
  }
  std::ofstream out(base / (m.name + ".manifest.json"), std::ios::trunc);
  out << doc.dump(2) << "\n";
  if (!out) raise(ErrorKind::IoError, "cannot write manifest for " + m.name);
}

namespace {

bool same_declared_shape(const Model& a, const Model& b) {
  if (!(a.input == b.input) || a.layers.size() != b.layers.size()) return false;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    const Layer &la = a.layers[i], &lb = b.layers[i];
    if (la.kind != lb.kind || la.units != lb.units || la.out_channels != lb.out_channels ||
        la.kernel_h != lb.kernel_h || la.kernel_w != lb.kernel_w ||
        la.dict_size != lb.dict_size || la.dim != lb.dim || la.reduce != lb.reduce) {
      return false;
    }
  }
  return true;
}

}  // namespace

void Catalog::register_table(const std::string& name, TableEntry entry) {
  std::unique_lock lock(mutex_);
  if (tables_.count(name)) raise(ErrorKind::IngestError, "table '" + name + "' already exists");
  tables_.emplace(name, std::move(entry));
}

bool Catalog::has_table(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return tables_.count(name) > 0;
}

const TableEntry& Catalog::table(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = tables_.find(name);
  if (it == tables_.end()) raise(ErrorKind::NotFound, "unknown table '" + name + "'");
  return it->second;
}

std::vector<std::string> Catalog::table_names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> names;
  names.reserve(tables_.size());
  for (const auto& [name, entry] : tables_) names.push_back(name);
  return names;
}

void Catalog::register_model(const Model& m) {
  std::unique_lock lock(mutex_);
  auto it = models_.find(m.name);
  if (it == models_.end()) {
    models_.emplace(m.name, m);
    return;
  }
  // CREATE MODEL then LOAD MODEL: a shape-only entry accepts its weights.
  if (!it->second.weights_loaded && m.weights_loaded) {
    if (!same_declared_shape(it->second, m)) {
      raise(ErrorKind::LoadError,
            "model '" + m.name + "' does not match its registered metadata");
    }
    it->second = m;
    return;
  }
  raise(ErrorKind::LoadError, "model '" + m.name + "' already registered");
}

bool Catalog::has_model(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return models_.count(name) > 0;
}

const Model& Catalog::model(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = models_.find(name);
  if (it == models_.end()) raise(ErrorKind::NotFound, "unknown model '" + name + "'");
  return it->second;
}

std::vector<std::string> Catalog::model_names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> names;
  names.reserve(models_.size());
  for (const auto& [name, model] : models_) names.push_back(name);
  return names;
}

void Catalog::drop_table(const std::string& name) {
  std::unique_lock lock(mutex_);
  tables_.erase(name);
}

}  // namespace inferdb
