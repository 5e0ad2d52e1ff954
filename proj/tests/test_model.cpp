// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <random>
#include <string>

#include "doctest.h"
#include "inferdb/model.hpp"
#include "oracles.hpp"

using namespace inferdb;

namespace {

// Reference workloads used throughout: a 14,588-way extreme classifier over
// 597,540 inputs, a small fraud scorer, and a transformer-style encoder MLP.
Model amazon14k() {
  return model_from_metadata("amazon14k", R"({
    "name": "amazon14k", "input_dim": 597540,
    "layers": [
      {"type": "dense", "units": 1024, "activation": "relu"},
      {"type": "dense", "units": 14588, "activation": "sigmoid"}
    ]})");
}

Model fraud() {
  return model_from_metadata("fraud", R"({
    "name": "fraud", "input_dim": 28,
    "layers": [
      {"type": "dense", "units": 256, "activation": "relu"},
      {"type": "dense", "units": 2, "activation": "softmax"}
    ]})");
}

}  // namespace

TEST_CASE("reference workloads report the expected parameter footprints") {
  Model big = amazon14k();
  auto diags = validate_model(big, 8000);
  REQUIRE(diags.size() == 2);
  CHECK(diags[0].weight_bytes == 4895047680LL);
  CHECK(diags[1].weight_bytes == 14588LL * 1024 * 8);
  CHECK(diags[0].est_bytes == 43203143680LL);

  auto diags1k = validate_model(big, 1000);
  CHECK(diags1k[0].est_bytes == 9683559680LL);

  Model small = fraud();
  auto fd = validate_model(small, 1000);
  REQUIRE(fd.size() == 2);
  CHECK(fd[0].est_bytes == matmul_est_bytes(1000, 28, 256));
  CHECK(fd[0].est_bytes == 2329344LL);
}

TEST_CASE("conv layer diagnostics count kernels plus bias") {
  Model m = model_from_metadata("landcover", R"({
    "name": "landcover", "input_shape": [16, 16, 3],
    "layers": [
      {"type": "conv2d", "out_channels": 2048, "kernel_h": 1, "kernel_w": 1,
       "activation": "relu"},
      {"type": "flatten"},
      {"type": "dense", "units": 4, "activation": "softmax"}
    ]})");
  auto diags = validate_model(m, 1);
  REQUIRE(diags.size() == 3);
  CHECK(diags[0].param_count == 2048 * (1 * 1 * 3) + 2048);
  CHECK(diags[0].out_shape == FlowShape::volume(16, 16, 2048));
  CHECK(diags[1].out_shape == FlowShape::flat(16 * 16 * 2048));
  CHECK(m.output_shape() == FlowShape::flat(4));
}

TEST_CASE("shape chain breaks raise with the layer index") {
  try {
    // Construction validates the shape chain eagerly.
    model_from_metadata("bad", R"({
      "name": "bad", "input_dim": 10,
      "layers": [
        {"type": "conv2d", "out_channels": 4, "kernel_h": 3, "kernel_w": 3,
         "activation": "relu"}
      ]})");
    CHECK(false);
  } catch (const EngineError& e) {
    CHECK(e.kind() == ErrorKind::LoadError);
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
}

TEST_CASE("metadata parsing rejects malformed documents") {
  CHECK_THROWS_AS(model_from_metadata("x", "not json"), EngineError);
  CHECK_THROWS_AS(model_from_metadata("x", R"({"name": "x", "layers": []})"), EngineError);
  CHECK_THROWS_AS(model_from_metadata("x", R"({
    "name": "x", "input_dim": 4,
    "layers": [{"type": "warp", "units": 2}]})"),
                  EngineError);
  CHECK_THROWS_AS(model_from_metadata("x", R"({
    "name": "x", "input_dim": 4,
    "layers": [{"type": "dense", "units": 2, "activation": "swish"}]})"),
                  EngineError);
}

TEST_CASE("metadata accepts an at-prefixed file path") {
  testing::TempDir tmp;
  std::string path = (tmp.path() / "meta.json").string();
  {
    std::ofstream out(path);
    out << R"({"name": "filed", "input_dim": 3,
               "layers": [{"type": "dense", "units": 2, "activation": "identity"}]})";
  }
  Model m = model_from_metadata("filed", "@" + path);
  CHECK(m.layers.size() == 1);
  CHECK(m.input == FlowShape::flat(3));
  CHECK_FALSE(m.weights_loaded);
}

TEST_CASE("save and reload round trips weights bitwise") {
  testing::TempDir tmp;
  std::mt19937_64 rng(51);
  Model m = testing::make_dense_model(
      "roundtrip", 12, {{7, Activation::Relu}, {3, Activation::Softmax}}, rng);
  save_model(m, tmp.str());
  Model back = load_model_manifest((tmp.path() / "roundtrip.manifest.json").string());
  CHECK(back.weights_loaded);
  REQUIRE(back.layers.size() == m.layers.size());
  for (size_t i = 0; i < m.layers.size(); ++i) {
    CHECK(testing::bitwise_equal(back.layers[i].weights, m.layers[i].weights));
    CHECK(testing::bitwise_equal(back.layers[i].bias, m.layers[i].bias));
    CHECK(back.layers[i].activation == m.layers[i].activation);
  }
  // Shape-only load of the same manifest plans without binding weights.
  Model shape_only =
      load_model_manifest((tmp.path() / "roundtrip.manifest.json").string(), false);
  CHECK_FALSE(shape_only.weights_loaded);
  CHECK(shape_only.layers[0].units == 7);
}

TEST_CASE("weight files must match the declared shape to the byte") {
  testing::TempDir tmp;
  std::mt19937_64 rng(52);
  Model m = testing::make_dense_model("clipped", 5, {{4, Activation::Identity}}, rng);
  save_model(m, tmp.str());
  auto wpath = tmp.path() / "l0_w.bin";
  std::filesystem::resize_file(wpath, std::filesystem::file_size(wpath) - 8);
  try {
    load_model_manifest((tmp.path() / "clipped.manifest.json").string());
    CHECK(false);
  } catch (const EngineError& e) {
    CHECK(e.kind() == ErrorKind::LoadError);
    CHECK(std::string(e.what()).find("bytes") != std::string::npos);
  }
}

TEST_CASE("a shape-only model refuses to be saved") {
  testing::TempDir tmp;
  Model m = fraud();
  CHECK_THROWS_AS(save_model(m, tmp.str()), EngineError);
}

TEST_CASE("catalog registration is upgrade-only for models") {
  std::mt19937_64 rng(53);
  Catalog cat;
  Model shape = model_from_metadata("up", R"({
    "name": "up", "input_dim": 4,
    "layers": [{"type": "dense", "units": 2, "activation": "identity"}]})");
  cat.register_model(shape);
  CHECK(cat.has_model("up"));
  CHECK_FALSE(cat.model("up").weights_loaded);

  Model bound = testing::make_dense_model("up", 4, {{2, Activation::Identity}}, rng);
  cat.register_model(bound);
  CHECK(cat.model("up").weights_loaded);

  // Re-registering over a weight-bound entry is rejected either way.
  CHECK_THROWS_AS(cat.register_model(bound), EngineError);
  CHECK_THROWS_AS(cat.register_model(shape), EngineError);

  // A bound upgrade must keep the declared shapes.
  Model other = testing::make_dense_model("wider", 4, {{3, Activation::Identity}}, rng);
  other.name = "up2";
  Model shape2 = shape;
  shape2.name = "up2";
  cat.register_model(shape2);
  CHECK_THROWS_AS(cat.register_model(other), EngineError);
}

TEST_CASE("catalog tables register and drop") {
  Catalog cat;
  TableEntry entry;
  entry.schema.columns = {{"id", ColumnType::Int}, {"f0", ColumnType::Float}};
  entry.key_columns = {0};
  entry.feature_columns = {1};
  entry.data.schema = entry.schema;
  cat.register_table("t", entry);
  CHECK(cat.has_table("t"));
  CHECK(cat.table("t").feature_columns == std::vector<int>{1});
  CHECK_THROWS_AS(cat.table("missing"), EngineError);
  CHECK(cat.table_names() == std::vector<std::string>{"t"});
  cat.drop_table("t");
  CHECK_FALSE(cat.has_table("t"));
}
