// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "inferdb/buffer_pool.hpp"
#include "inferdb/model.hpp"
#include "inferdb/relation.hpp"

namespace inferdb {

struct CsvOptions {
  // Column types in header order; empty means infer (int if every value
  // parses as an int, else float if every value parses as a float, else
  // string).
  std::vector<ColumnType> schema;
  // Declared unique key columns, by header name.
  std::vector<std::string> key_columns;
};

/// Loads a comma-separated file with a mandatory header row. Quoted fields
/// use doubled-quote escaping and may span lines. Rows move through the
/// buffer pool in 4,096-row batches when a pool is given. Ragged rows and
/// values that do not parse under the declared schema raise ingest-error with
/// the 1-based data row number.
TableEntry ingest_csv(const std::string& path, const CsvOptions& options,
                      BufferPool* pool = nullptr);

/// Numeric non-key columns, in schema order. These are the columns
/// `predict(*)` binds to.
std::vector<int> feature_columns_of(const Schema& schema, const std::vector<int>& key_columns);

}  // namespace inferdb
