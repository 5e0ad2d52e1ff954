// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/engine.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

#include "json.hpp"

#include "inferdb/parser.hpp"

namespace inferdb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Runs one pipeline phase; engine errors are re-raised with the phase name.
template <class Fn>
auto phase(const char* label, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const EngineError& e) {
    raise(e.kind(), std::string(label) + ": " + e.message());
  }
}

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::IoError, std::string("cannot open ") + what + ": " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << text;
    if (!out) raise(ErrorKind::IoError, "cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

/// Metadata document for a shape-only model, mirroring the manifest layout
/// minus the weight files.
json metadata_of(const Model& m) {
  json doc;
  doc["name"] = m.name;
  if (m.input.spatial) {
    doc["input_shape"] = {m.input.h, m.input.w, m.input.c};
  } else {
    doc["input_dim"] = m.input.width;
  }
  doc["layers"] = json::array();
  for (const Layer& layer : m.layers) {
    json jl;
    jl["type"] = std::string(to_string(layer.kind));
    switch (layer.kind) {
      case LayerKind::Dense:
        jl["units"] = layer.units;
        jl["activation"] = std::string(to_string(layer.activation));
        break;
      case LayerKind::Conv2D:
        jl["out_channels"] = layer.out_channels;
        jl["kernel_h"] = layer.kernel_h;
        jl["kernel_w"] = layer.kernel_w;
        jl["activation"] = std::string(to_string(layer.activation));
        break;
      case LayerKind::Flatten:
        break;
      case LayerKind::Embedding:
        jl["dict_size"] = layer.dict_size;
        jl["dim"] = layer.dim;
        jl["reduce"] = layer.reduce == EmbedReduce::Sum ? "sum" : "none";
        break;
    }
    doc["layers"].push_back(std::move(jl));
  }
  return doc;
}

void write_table_file(const fs::path& path, const TableEntry& entry) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    int64_t n = entry.data.row_count();
    constexpr int64_t kBatch = 4096;
    uint64_t batches = static_cast<uint64_t>((n + kBatch - 1) / kBatch);
    out.write(reinterpret_cast<const char*>(&batches), sizeof(batches));
    for (int64_t b = 0; b < static_cast<int64_t>(batches); ++b) {
      int64_t lo = b * kBatch;
      int64_t hi = std::min(n, lo + kBatch);
      std::vector<Row> rows(entry.data.rows.begin() + lo, entry.data.rows.begin() + hi);
      std::vector<uint8_t> bytes = encode_row_batch(entry.schema, rows);
      uint64_t len = bytes.size();
      out.write(reinterpret_cast<const char*>(&len), sizeof(len));
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) raise(ErrorKind::IoError, "cannot write table file " + path.string());
  }
  fs::rename(tmp, path);
}

std::vector<Row> read_table_file(const fs::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoError, "cannot open table file " + path.string());
  uint64_t batches = 0;
  in.read(reinterpret_cast<char*>(&batches), sizeof(batches));
  std::vector<Row> rows;
  for (uint64_t b = 0; b < batches; ++b) {
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::vector<uint8_t> bytes(len);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(len));
    if (!in) raise(ErrorKind::CorruptRelation, "table file truncated: " + path.string());
    std::vector<Row> batch = decode_row_batch(schema, bytes);
    for (Row& row : batch) rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void EngineConfig::validate() const {
  if (memory_threshold_bytes < 0) {
    raise(ErrorKind::InvalidArgument, "memory threshold must be nonnegative");
  }
  if (buffer_pool_bytes <= 0) {
    raise(ErrorKind::InvalidArgument, "buffer pool budget must be positive");
  }
  if (block_rows < 1 || block_cols < 1) {
    raise(ErrorKind::InvalidArgument, "block dimensions must be at least 1");
  }
  if (workers < 1) raise(ErrorKind::InvalidArgument, "workers must be at least 1");
  if (pushdown_width_ratio <= 0.0) {
    raise(ErrorKind::InvalidArgument, "pushdown width ratio must be positive");
  }
  cache.validate();
}

OptimizerConfig EngineConfig::optimizer() const {
  OptimizerConfig oc;
  oc.memory_threshold_bytes = memory_threshold_bytes;
  oc.block_rows = block_rows;
  oc.block_cols = block_cols;
  oc.pushdown_enabled = pushdown_enabled;
  oc.pushdown_width_ratio = pushdown_width_ratio;
  return oc;
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.spill_dir.empty()) {
    if (!config_.data_dir.empty()) {
      config_.spill_dir = (fs::path(config_.data_dir) / "spill").string();
    } else {
      config_.spill_dir =
          (fs::temp_directory_path() / ("inferdb_spill_" + std::to_string(::getpid()))).string();
    }
  }
  fs::create_directories(config_.spill_dir);
  lock_spill_dir();
  pool_ = std::make_unique<BufferPool>(config_.buffer_pool_bytes, config_.spill_dir);
  if (config_.cache.mode != CacheMode::Off) {
    cache_ = std::make_unique<InferenceCache>(config_.cache);
  }
  if (!config_.data_dir.empty()) {
    fs::create_directories(fs::path(config_.data_dir) / "tables");
    fs::create_directories(fs::path(config_.data_dir) / "models");
    load_catalog();
  }
}

Engine::~Engine() {
  pool_.reset();
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

void Engine::lock_spill_dir() {
  fs::path lock_path = fs::path(config_.spill_dir) / ".lock";
  lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  if (lock_fd_ < 0) {
    raise(ErrorKind::IoError, "cannot create lock file in " + config_.spill_dir);
  }
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    raise(ErrorKind::IoError,
          "spill directory is locked by another session: " + config_.spill_dir);
  }
}

std::string Engine::table_file(const std::string& name) const {
  return (fs::path(config_.data_dir) / "tables" / (name + ".tbl")).string();
}

void Engine::load_catalog() {
  fs::path path = fs::path(config_.data_dir) / "catalog.json";
  if (!fs::exists(path)) return;
  json doc;
  try {
    doc = json::parse(read_text_file(path.string(), "catalog"));
  } catch (const json::exception& e) {
    raise(ErrorKind::CorruptRelation, std::string("catalog.json is not well-formed: ") + e.what());
  }
  for (const json& jt : doc.value("tables", json::array())) {
    TableEntry entry;
    std::string name = jt.at("name").get<std::string>();
    for (const json& jc : jt.at("schema")) {
      entry.schema.columns.push_back({jc.at("name").get<std::string>(),
                                      column_type_from_name(jc.at("type").get<std::string>())});
    }
    entry.key_columns = jt.at("keys").get<std::vector<int>>();
    entry.feature_columns = feature_columns_of(entry.schema, entry.key_columns);
    entry.data.schema = entry.schema;
    entry.data.key_columns = entry.key_columns;
    entry.data.rows = read_table_file(table_file(name), entry.schema);
    catalog_.register_table(name, std::move(entry));
  }
  for (const json& jm : doc.value("models", json::array())) {
    std::string name = jm.at("name").get<std::string>();
    if (jm.contains("manifest")) {
      Model m = load_model_manifest(jm.at("manifest").get<std::string>(), true);
      m.name = name;
      catalog_.register_model(m);
    } else {
      std::string meta = jm.at("metadata").dump();
      catalog_.register_model(model_from_metadata(name, meta));
      model_metadata_[name] = meta;
    }
  }
}

void Engine::save_catalog() {
  if (config_.data_dir.empty()) return;
  json doc;
  doc["tables"] = json::array();
  for (const std::string& name : catalog_.table_names()) {
    const TableEntry& entry = catalog_.table(name);
    json jt;
    jt["name"] = name;
    jt["keys"] = entry.key_columns;
    jt["schema"] = json::array();
    for (const Column& c : entry.schema.columns) {
      jt["schema"].push_back({{"name", c.name}, {"type", std::string(to_string(c.type))}});
    }
    write_table_file(table_file(name), entry);
    doc["tables"].push_back(std::move(jt));
  }
  doc["models"] = json::array();
  for (const std::string& name : catalog_.model_names()) {
    const Model& m = catalog_.model(name);
    json jm;
    jm["name"] = name;
    if (m.weights_loaded) {
      fs::path dir = fs::path(config_.data_dir) / "models" / name;
      save_model(m, dir.string());
      jm["manifest"] = (dir / (name + ".manifest.json")).string();
    } else {
      auto it = model_metadata_.find(name);
      jm["metadata"] = it != model_metadata_.end() ? json::parse(it->second) : metadata_of(m);
    }
    doc["models"].push_back(std::move(jm));
  }
  write_text_file_atomic(fs::path(config_.data_dir) / "catalog.json", doc.dump(2) + "\n");
}

int64_t Engine::ingest(const std::string& table, const std::string& csv_path,
                       const CsvOptions& options) {
  TableEntry entry = ingest_csv(csv_path, options, pool_.get());
  int64_t rows = entry.data.row_count();
  catalog_.register_table(table, std::move(entry));
  try {
    save_catalog();
  } catch (...) {
    catalog_.drop_table(table);
    throw;
  }
  return rows;
}

void Engine::create_model(const std::string& name, const std::string& metadata) {
  std::string text = metadata;
  if (!text.empty() && text[0] == '@') {
    text = read_text_file(text.substr(1), "metadata file");
  }
  Model m = model_from_metadata(name, text);
  catalog_.register_model(m);
  model_metadata_[name] = text;
  save_catalog();
}

void Engine::load_model(const std::string& name, const std::string& manifest_path) {
  Model m = load_model_manifest(manifest_path, true);
  m.name = name;
  catalog_.register_model(m);
  model_metadata_.erase(name);
  save_catalog();
}

QueryResult Engine::run_query(const std::string& sql) {
  QueryAst ast = phase("parse", [&] { return parse_query(sql); });
  Plan ir = phase("bind", [&] { return build_ir(ast, catalog_); });
  OptimizerConfig oc = config_.optimizer();
  ExecutablePlan ex = phase("plan", [&] { return lower_plan(optimize(std::move(ir), oc), oc); });
  QueryResult result;
  result.explain_text = explain(ex.plan);
  ExecContext ctx;
  ctx.catalog = &catalog_;
  ctx.pool = pool_.get();
  ctx.cache = cache_.get();
  ctx.workers = config_.workers;
  ctx.block_rows = config_.block_rows;
  ctx.block_cols = config_.block_cols;
  RuntimeValue value = phase("execute", [&] { return execute_plan(ex, ctx, &result.report); });
  result.rows = phase("execute", [&] { return result_relation(value); });
  return result;
}

std::string Engine::explain_query(const std::string& sql) {
  QueryAst ast = phase("parse", [&] { return parse_query(sql); });
  Plan ir = phase("bind", [&] { return build_ir(ast, catalog_); });
  OptimizerConfig oc = config_.optimizer();
  ExecutablePlan ex = phase("plan", [&] { return lower_plan(optimize(std::move(ir), oc), oc); });
  return explain(ex.plan);
}

}  // namespace inferdb
