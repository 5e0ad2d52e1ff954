// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "inferdb/buffer_pool.hpp"
#include "inferdb/tensor.hpp"

namespace inferdb {

/// A blocked matrix whose tiles live in a buffer pool, so only a budgeted
/// subset is ever resident. Grid geometry mirrors BlockedMatrix; tiles are
/// immutable once put. Dropping the store releases its pages and spill files.
class BlockStore {
 public:
  BlockStore(BufferPool& pool, std::string id, int64_t logical_rows, int64_t logical_cols,
             int64_t block_rows, int64_t block_cols);
  ~BlockStore();

  BlockStore(BlockStore&& other) noexcept;
  BlockStore& operator=(BlockStore&& other) noexcept;
  BlockStore(const BlockStore&) = delete;
  BlockStore& operator=(const BlockStore&) = delete;

  int64_t logical_rows() const { return logical_rows_; }
  int64_t logical_cols() const { return logical_cols_; }
  int64_t block_rows() const { return block_rows_; }
  int64_t block_cols() const { return block_cols_; }
  int64_t grid_rows() const { return grid_rows_; }
  int64_t grid_cols() const { return grid_cols_; }
  int64_t rows_of(int64_t block_row) const;
  int64_t cols_of(int64_t block_col) const;

  void put_block(int64_t block_row, int64_t block_col, const DenseTensor& data);
  DenseTensor get_block(int64_t block_row, int64_t block_col) const;

  const std::string& id() const { return id_; }
  BufferPool& pool() const { return *pool_; }

 private:
  BufferPool* pool_ = nullptr;
  std::string id_;
  int64_t logical_rows_ = 0, logical_cols_ = 0;
  int64_t block_rows_ = 0, block_cols_ = 0;
  int64_t grid_rows_ = 0, grid_cols_ = 0;
};

/// Fresh process-unique relation id for intermediates, e.g. "mm_partial_17".
std::string fresh_relation_id(std::string_view hint);

BlockStore store_from_blocked(BufferPool& pool, std::string id, const BlockedMatrix& m);
BlockedMatrix blocked_from_store(const BlockStore& store);

/// Cuts a dense matrix into tiles one at a time (never a second full copy).
BlockStore store_from_dense(BufferPool& pool, std::string id, const DenseTensor& t,
                            int64_t block_rows, int64_t block_cols);
DenseTensor dense_from_store(const BlockStore& store);

/// Re-tiles to a new grid, gathering each output tile from the overlapping
/// input tiles; memory stays at a few tiles.
BlockStore regrid(const BlockStore& in, std::string out_id, int64_t block_rows,
                  int64_t block_cols);

}  // namespace inferdb
