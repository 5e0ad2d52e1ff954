// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "inferdb/lowering.hpp"
#include "inferdb/relation.hpp"
#include "inferdb/tensor.hpp"

namespace inferdb {

enum class LayerKind { Dense, Conv2D, Flatten, Embedding };

std::string_view to_string(LayerKind kind);

struct Layer {
  LayerKind kind = LayerKind::Dense;
  Activation activation = Activation::Identity;

  int64_t units = 0;                                // Dense
  int64_t out_channels = 0, kernel_h = 0, kernel_w = 0;  // Conv2D
  int64_t dict_size = 0, dim = 0;                   // Embedding
  EmbedReduce reduce = EmbedReduce::None;           // Embedding

  // Bound parameters. Dense: weights is units x in, bias is [units].
  // Conv2D: weights is outC x kh x kw x C, bias is [outC]. Embedding:
  // weights is dict_size x dim. Empty until load_model binds them.
  DenseTensor weights;
  DenseTensor bias;

  // Manifest file names, kept so a loaded model can be saved back out.
  std::string weights_file;
  std::string bias_file;
};

/// Shape of the value flowing between layers: a flat feature width or a
/// spatial H x W x C volume.
struct FlowShape {
  bool spatial = false;
  int64_t width = 0;
  int64_t h = 0, w = 0, c = 0;

  static FlowShape flat(int64_t width) { return {false, width, 0, 0, 0}; }
  static FlowShape volume(int64_t h, int64_t w, int64_t c) { return {true, 0, h, w, c}; }
  int64_t elements() const { return spatial ? h * w * c : width; }
  std::string text() const;
  bool operator==(const FlowShape&) const = default;
};

struct Model {
  std::string name;
  FlowShape input;
  std::vector<Layer> layers;
  // A model created from metadata alone is plannable (shapes known) but not
  // executable until load_model binds its weights.
  bool weights_loaded = false;

  /// Shape flowing out of the last layer.
  FlowShape output_shape() const;
};

/// Estimated working bytes of an (m x k) by (k x n) product: both inputs plus
/// the output at 8 bytes per element.
constexpr int64_t matmul_est_bytes(int64_t m, int64_t k, int64_t n) {
  return (m * k + k * n + m * n) * 8;
}

struct LayerDiagnostic {
  int index = 0;
  LayerKind kind = LayerKind::Dense;
  FlowShape in_shape;
  FlowShape out_shape;
  int64_t param_count = 0;   // weight and bias elements together
  int64_t weight_bytes = 0;  // weight tensor alone
  int64_t bias_bytes = 0;
  int64_t est_bytes = 0;  // estimate_memory of the layer's dominant op at the given batch
};

/// Walks the shape chain and reports per-layer shapes, parameter footprints,
/// and memory estimates at the given batch size. Raises LoadError naming the
/// offending layer index when the chain breaks or bound weights disagree with
/// the declared dimensions.
std::vector<LayerDiagnostic> validate_model(const Model& m, int64_t batch_size = 1);

/// Parses a manifest document: {"name": ..., "input_dim": N | "input_shape":
/// [H,W,C], "layers": [{"type": ..., ...}]}. When `bind_weights` is set the
/// referenced weight files (resolved relative to the manifest) are read as raw
/// little-endian float64, row-major, and must match the declared shapes to the
/// byte.
Model load_model_manifest(const std::string& manifest_path, bool bind_weights = true);

/// Builds a shape-only model from a metadata document with the same structure
/// as a manifest, minus the weight files. Accepts a literal document or a
/// path prefixed with '@'.
Model model_from_metadata(const std::string& name, const std::string& metadata);

/// Writes the manifest and raw weight files into `dir`. Reloading yields
/// bitwise-identical tensors.
void save_model(const Model& m, const std::string& dir);

struct TableEntry {
  Schema schema;
  std::vector<int> key_columns;
  std::vector<int> feature_columns;  // numeric non-key columns, schema order
  RowRelation data;
};

/// Name to table/model registry. Reads are concurrent; registrations take the
/// writer lock and either fully succeed or leave the catalog untouched.
class Catalog {
 public:
  void register_table(const std::string& name, TableEntry entry);
  bool has_table(const std::string& name) const;
  const TableEntry& table(const std::string& name) const;
  std::vector<std::string> table_names() const;

  /// Registers a new model. An entry that is already weight-bound rejects
  /// re-registration; a shape-only entry accepts a weight-bound model with
  /// the same declared shapes (the CREATE MODEL then LOAD MODEL sequence).
  void register_model(const Model& m);
  bool has_model(const std::string& name) const;
  const Model& model(const std::string& name) const;
  std::vector<std::string> model_names() const;

  void drop_table(const std::string& name);

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, TableEntry> tables_;
  std::unordered_map<std::string, Model> models_;
};

}  // namespace inferdb
