// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>

#include "inferdb/cache.hpp"
#include "inferdb/csv.hpp"
#include "inferdb/executor.hpp"
#include "inferdb/optimizer.hpp"

namespace inferdb {

struct EngineConfig {
  int64_t memory_threshold_bytes = 2147483648;
  int64_t buffer_pool_bytes = int64_t{256} << 20;
  int64_t block_rows = 1024;
  int64_t block_cols = 1024;
  // Catalog persistence root; empty keeps the session in memory only.
  std::string data_dir;
  // Spill directory; empty resolves to <data_dir>/spill or a fresh temp dir.
  std::string spill_dir;
  int workers = 1;
  CacheConfig cache;
  uint64_t seed = 42;
  bool pushdown_enabled = true;
  double pushdown_width_ratio = 1.0;

  void validate() const;
  OptimizerConfig optimizer() const;
};

struct QueryResult {
  RowRelation rows;
  std::string explain_text;
  ExecutionReport report;
};

/// One embedded engine session: a buffer pool, a catalog (optionally
/// persisted under data_dir), an inference cache, and the query pipeline
/// parse -> bind -> plan -> execute. Errors from each phase are re-raised
/// with the phase name prefixed. The spill directory is held under an
/// exclusive lock file so two sessions never share it.
class Engine {
 public:
  explicit Engine(EngineConfig config);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Loads a CSV into the catalog; returns the row count.
  int64_t ingest(const std::string& table, const std::string& csv_path, const CsvOptions& options);

  /// Registers a shape-only model from a metadata document (literal JSON or
  /// '@path').
  void create_model(const std::string& name, const std::string& metadata);

  /// Loads a weight-bound model from a manifest file.
  void load_model(const std::string& name, const std::string& manifest_path);

  QueryResult run_query(const std::string& sql);

  /// Plans without executing.
  std::string explain_query(const std::string& sql);

  const Catalog& catalog() const { return catalog_; }
  BufferPool& pool() { return *pool_; }
  InferenceCache* cache() { return cache_.get(); }
  const EngineConfig& config() const { return config_; }

 private:
  void lock_spill_dir();
  void load_catalog();
  void save_catalog();
  std::string table_file(const std::string& name) const;

  EngineConfig config_;
  std::unique_ptr<BufferPool> pool_;
  std::unique_ptr<InferenceCache> cache_;
  Catalog catalog_;
  std::unordered_map<std::string, std::string> model_metadata_;  // shape-only docs
  int lock_fd_ = -1;
};

}  // namespace inferdb
