// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/block_store.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>

namespace inferdb {

BlockStore::BlockStore(BufferPool& pool, std::string id, int64_t logical_rows,
                       int64_t logical_cols, int64_t block_rows, int64_t block_cols)
    : pool_(&pool),
      id_(std::move(id)),
      logical_rows_(logical_rows),
      logical_cols_(logical_cols),
      block_rows_(block_rows),
      block_cols_(block_cols) {
  if (logical_rows < 1 || logical_cols < 1 || block_rows < 1 || block_cols < 1) {
    raise(ErrorKind::InvalidArgument, "block store dimensions must be >= 1");
  }
  grid_rows_ = (logical_rows + block_rows - 1) / block_rows;
  grid_cols_ = (logical_cols + block_cols - 1) / block_cols;
}

BlockStore::~BlockStore() {
  if (pool_ != nullptr) pool_->drop_relation(id_);
}

BlockStore::BlockStore(BlockStore&& other) noexcept { *this = std::move(other); }

BlockStore& BlockStore::operator=(BlockStore&& other) noexcept {
  if (this != &other) {
    if (pool_ != nullptr) pool_->drop_relation(id_);
    pool_ = other.pool_;
    id_ = std::move(other.id_);
    logical_rows_ = other.logical_rows_;
    logical_cols_ = other.logical_cols_;
    block_rows_ = other.block_rows_;
    block_cols_ = other.block_cols_;
    grid_rows_ = other.grid_rows_;
    grid_cols_ = other.grid_cols_;
    other.pool_ = nullptr;
  }
  return *this;
}

int64_t BlockStore::rows_of(int64_t block_row) const {
  return std::min(block_rows_, logical_rows_ - block_row * block_rows_);
}

int64_t BlockStore::cols_of(int64_t block_col) const {
  return std::min(block_cols_, logical_cols_ - block_col * block_cols_);
}

void BlockStore::put_block(int64_t block_row, int64_t block_col, const DenseTensor& data) {
  if (block_row < 0 || block_row >= grid_rows_ || block_col < 0 || block_col >= grid_cols_) {
    raise(ErrorKind::InvalidArgument, "block index outside the grid");
  }
  if (data.rank() != 2 || data.rows() != rows_of(block_row) || data.cols() != cols_of(block_col)) {
    raise(ErrorKind::InvalidArgument, "block payload does not match its grid slot");
  }
  pool_->put(BlockKey{id_, block_row, block_col}, encode_block(data));
}

DenseTensor BlockStore::get_block(int64_t block_row, int64_t block_col) const {
  PageBytes page = pool_->get(BlockKey{id_, block_row, block_col});
  return decode_block(*page);
}

std::string fresh_relation_id(std::string_view hint) {
  static std::atomic<uint64_t> counter{0};
  return std::string(hint) + "_" + std::to_string(counter.fetch_add(1));
}

BlockStore store_from_blocked(BufferPool& pool, std::string id, const BlockedMatrix& m) {
  m.validate();
  BlockStore store(pool, std::move(id), m.logical_rows(), m.logical_cols(), m.block_rows(),
                   m.block_cols());
  for (int64_t bi = 0; bi < m.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < m.grid_cols(); ++bj) {
      store.put_block(bi, bj, m.block(bi, bj).data);
    }
  }
  return store;
}

BlockedMatrix blocked_from_store(const BlockStore& store) {
  BlockedMatrix m(store.logical_rows(), store.logical_cols(), store.block_rows(),
                  store.block_cols());
  for (int64_t bi = 0; bi < store.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < store.grid_cols(); ++bj) {
      m.set_block(TensorBlock{bi, bj, store.rows_of(bi), store.cols_of(bj),
                              store.get_block(bi, bj)});
    }
  }
  return m;
}

BlockStore store_from_dense(BufferPool& pool, std::string id, const DenseTensor& t,
                            int64_t block_rows, int64_t block_cols) {
  if (t.rank() != 2) raise(ErrorKind::InvalidArgument, "store_from_dense expects a matrix");
  BlockStore store(pool, std::move(id), t.rows(), t.cols(), block_rows, block_cols);
  for (int64_t bi = 0; bi < store.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < store.grid_cols(); ++bj) {
      int64_t rows = store.rows_of(bi), cols = store.cols_of(bj);
      int64_t r0 = bi * block_rows, c0 = bj * block_cols;
      DenseTensor block = DenseTensor::matrix(rows, cols);
      for (int64_t r = 0; r < rows; ++r) {
        std::memcpy(block.raw() + r * cols, t.raw() + (r0 + r) * t.cols() + c0,
                    static_cast<size_t>(cols) * sizeof(double));
      }
      store.put_block(bi, bj, block);
    }
  }
  return store;
}

DenseTensor dense_from_store(const BlockStore& store) {
  DenseTensor out = DenseTensor::matrix(store.logical_rows(), store.logical_cols());
  for (int64_t bi = 0; bi < store.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < store.grid_cols(); ++bj) {
      DenseTensor block = store.get_block(bi, bj);
      int64_t r0 = bi * store.block_rows(), c0 = bj * store.block_cols();
      for (int64_t r = 0; r < block.rows(); ++r) {
        std::memcpy(out.raw() + (r0 + r) * out.cols() + c0, block.raw() + r * block.cols(),
                    static_cast<size_t>(block.cols()) * sizeof(double));
      }
    }
  }
  return out;
}

BlockStore regrid(const BlockStore& in, std::string out_id, int64_t block_rows,
                  int64_t block_cols) {
  BlockStore out(in.pool(), std::move(out_id), in.logical_rows(), in.logical_cols(), block_rows,
                 block_cols);
  for (int64_t bi = 0; bi < out.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < out.grid_cols(); ++bj) {
      int64_t rows = out.rows_of(bi), cols = out.cols_of(bj);
      int64_t r0 = bi * block_rows, c0 = bj * block_cols;
      DenseTensor block = DenseTensor::matrix(rows, cols);
      // Overlapping source tiles.
      int64_t src_bi0 = r0 / in.block_rows();
      int64_t src_bi1 = (r0 + rows - 1) / in.block_rows();
      int64_t src_bj0 = c0 / in.block_cols();
      int64_t src_bj1 = (c0 + cols - 1) / in.block_cols();
      for (int64_t sbi = src_bi0; sbi <= src_bi1; ++sbi) {
        for (int64_t sbj = src_bj0; sbj <= src_bj1; ++sbj) {
          DenseTensor src = in.get_block(sbi, sbj);
          int64_t sr0 = sbi * in.block_rows(), sc0 = sbj * in.block_cols();
          int64_t rlo = std::max(r0, sr0), rhi = std::min(r0 + rows, sr0 + src.rows());
          int64_t clo = std::max(c0, sc0), chi = std::min(c0 + cols, sc0 + src.cols());
          for (int64_t r = rlo; r < rhi; ++r) {
            std::memcpy(block.raw() + (r - r0) * cols + (clo - c0),
                        src.raw() + (r - sr0) * src.cols() + (clo - sc0),
                        static_cast<size_t>(chi - clo) * sizeof(double));
          }
        }
      }
      out.put_block(bi, bj, block);
    }
  }
  return out;
}

}  // namespace inferdb
