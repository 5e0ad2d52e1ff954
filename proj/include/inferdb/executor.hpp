// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "inferdb/block_store.hpp"
#include "inferdb/buffer_pool.hpp"
#include "inferdb/cache.hpp"
#include "inferdb/model.hpp"
#include "inferdb/optimizer.hpp"

namespace inferdb {

/// Dense row-major matrix with optional per-row identifying keys carried
/// alongside (the push-down join aligns partial products on them).
struct KeyedMatrix {
  std::vector<std::string> key_names;
  std::vector<Row> keys;  // one per data row; empty means positional
  DenseTensor data;
};

/// Blocked matrix in the buffer pool; keys ride along untouched.
struct BlockedValue {
  std::shared_ptr<BlockStore> store;
  std::vector<std::string> key_names;
  std::vector<Row> keys;
};

using RowsRef = std::shared_ptr<const RowRelation>;
using RuntimeValue = std::variant<RowsRef, KeyedMatrix, BlockedValue>;

struct NodeReport {
  int id = 0;
  std::string kind;
  std::string repr;
  int64_t out_rows = 0;
  int64_t out_cols = 0;
  double ms = 0.0;
};

struct ExecutionReport {
  std::vector<NodeReport> nodes;
  BufferPoolStats pool{};
  CacheStats cache{};
  double total_ms = 0.0;
  int64_t result_rows = 0;

  /// Per-node shapes, representations and cache counters; everything here is
  /// reproducible for a fixed seed and any worker count. Timings and buffer
  /// pool counters live in info_text().
  std::string deterministic_text() const;
  std::string info_text() const;
};

struct ExecContext {
  const Catalog* catalog = nullptr;
  BufferPool* pool = nullptr;
  InferenceCache* cache = nullptr;  // optional; mode Off behaves like null
  int workers = 1;
  int64_t block_rows = 1024;
  int64_t block_cols = 1024;
};

RuntimeValue execute_plan(const ExecutablePlan& exec, ExecContext& ctx,
                          ExecutionReport* report = nullptr);

/// Final value as a relation: rows pass through; a (keyed) matrix becomes key
/// columns followed by float columns pred_0..pred_{n-1}.
RowRelation result_relation(const RuntimeValue& value);

}  // namespace inferdb
