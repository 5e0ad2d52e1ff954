// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/lowering.hpp"

#include <cstring>
#include <unordered_map>

namespace inferdb {

std::string_view to_string(Repr repr) {
  switch (repr) {
    case Repr::Unassigned: return "UNASSIGNED";
    case Repr::Udf: return "UDF";
    case Repr::Relation: return "RELATION";
  }
  return "unknown";
}

namespace {

// The block-index relation of a store: one (block_row_id, block_col_id) row
// per tile, ascending row-major. Joins and aggregates run over these index
// tuples; tile payloads stay in the buffer pool until a combiner needs them.
RowRelation index_relation(const BlockStore& store) {
  RowRelation rel;
  rel.schema.columns = {{"block_row_id", ColumnType::Int}, {"block_col_id", ColumnType::Int}};
  rel.rows.reserve(static_cast<size_t>(store.grid_rows() * store.grid_cols()));
  for (int64_t bi = 0; bi < store.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < store.grid_cols(); ++bj) {
      rel.rows.push_back({Value(bi), Value(bj)});
    }
  }
  return rel;
}

}  // namespace

BlockStore matmul_as_join_agg(const BlockStore& a, const BlockStore& b, std::string out_id,
                              int workers) {
  if (a.logical_cols() != b.logical_rows()) {
    raise(ErrorKind::InvalidArgument,
          "matmul shape mismatch: " + std::to_string(a.logical_cols()) + " vs " +
              std::to_string(b.logical_rows()));
  }
  if (a.block_cols() != b.block_rows()) {
    raise(ErrorKind::InvalidArgument, "matmul inner partitioning mismatch: block " +
                                          std::to_string(a.block_cols()) + " vs " +
                                          std::to_string(b.block_rows()));
  }
  RowRelation a_idx = index_relation(a);
  RowRelation b_idx = index_relation(b);

  Schema pair_schema;
  pair_schema.columns = {{"out_row", ColumnType::Int},
                         {"out_col", ColumnType::Int},
                         {"inner", ColumnType::Int}};
  RowRelation pairs = equi_join(
      a_idx, b_idx, {1}, {0}, pair_schema,
      [](const Row& l, const Row& r) -> Row { return {l[0], r[1], l[1]}; }, workers);

  BlockStore out(a.pool(), std::move(out_id), a.logical_rows(), b.logical_cols(), a.block_rows(),
                 b.block_cols());
  Schema out_schema;
  out_schema.columns = {{"block_row_id", ColumnType::Int}, {"block_col_id", ColumnType::Int}};
  group_aggregate<DenseTensor>(
      pairs, {0, 1}, /*tiebreak_col=*/2, out_schema, DenseTensor{},
      [&](DenseTensor& acc, const Row& row) {
        int64_t i = row[0].as_int(), j = row[1].as_int(), k = row[2].as_int();
        DenseTensor partial = dense_matmul(a.get_block(i, k), b.get_block(k, j));
        if (acc.rank() == 0) {
          acc = std::move(partial);
        } else {
          dense_add_in_place(acc, partial);
        }
      },
      [&](const Row& key, DenseTensor&& acc) -> Row {
        out.put_block(key[0].as_int(), key[1].as_int(), acc);
        return {key[0], key[1]};
      },
      workers);
  return out;
}

BlockedMatrix matmul_as_join_agg(const BlockedMatrix& a, const BlockedMatrix& b, BufferPool& pool,
                                 int workers) {
  BlockStore sa = store_from_blocked(pool, fresh_relation_id("mm_a"), a);
  BlockStore sb = store_from_blocked(pool, fresh_relation_id("mm_b"), b);
  BlockStore sc = matmul_as_join_agg(sa, sb, fresh_relation_id("mm_out"), workers);
  return blocked_from_store(sc);
}

BlockStore add_as_join(const BlockStore& a, const BlockStore& b, std::string out_id, int workers) {
  if (a.logical_rows() != b.logical_rows() || a.logical_cols() != b.logical_cols() ||
      a.block_rows() != b.block_rows() || a.block_cols() != b.block_cols()) {
    raise(ErrorKind::InvalidArgument, "add_as_join operands must share shape and block grid");
  }
  RowRelation a_idx = index_relation(a);
  RowRelation b_idx = index_relation(b);
  BlockStore out(a.pool(), std::move(out_id), a.logical_rows(), a.logical_cols(), a.block_rows(),
                 a.block_cols());
  Schema out_schema = a_idx.schema;
  equi_join(
      a_idx, b_idx, {0, 1}, {0, 1}, out_schema,
      [&](const Row& l, const Row& r) -> Row {
        int64_t bi = l[0].as_int(), bj = l[1].as_int();
        (void)r;
        DenseTensor sum = dense_add(a.get_block(bi, bj), b.get_block(bi, bj));
        out.put_block(bi, bj, sum);
        return {l[0], l[1]};
      },
      workers);
  return out;
}

BlockedMatrix add_as_join(const BlockedMatrix& a, const BlockedMatrix& b, BufferPool& pool,
                          int workers) {
  BlockStore sa = store_from_blocked(pool, fresh_relation_id("add_a"), a);
  BlockStore sb = store_from_blocked(pool, fresh_relation_id("add_b"), b);
  BlockStore sc = add_as_join(sa, sb, fresh_relation_id("add_out"), workers);
  return blocked_from_store(sc);
}

BlockStore activation_as_map(const BlockStore& m, Activation kind, std::string out_id,
                             int workers) {
  if (kind == Activation::Softmax && m.block_cols() < m.logical_cols()) {
    raise(ErrorKind::InvalidPlan,
          "softmax over a row split across blocks; insert a reblock to full-width row strips");
  }
  RowRelation idx = index_relation(m);
  BlockStore out(m.pool(), std::move(out_id), m.logical_rows(), m.logical_cols(), m.block_rows(),
                 m.block_cols());
  map_udf(
      idx, idx.schema,
      [&](const Row& row) -> Row {
        int64_t bi = row[0].as_int(), bj = row[1].as_int();
        out.put_block(bi, bj, apply_activation(m.get_block(bi, bj), kind));
        return row;
      },
      workers);
  return out;
}

BlockedMatrix activation_as_map(const BlockedMatrix& m, Activation kind, BufferPool& pool,
                                int workers) {
  BlockStore sm = store_from_blocked(pool, fresh_relation_id("act_in"), m);
  BlockStore so = activation_as_map(sm, kind, fresh_relation_id("act_out"), workers);
  return blocked_from_store(so);
}

BlockStore add_bias_as_map(const BlockStore& m, const DenseTensor& bias, std::string out_id,
                           int workers) {
  if (bias.rank() != 1 || bias.size() != m.logical_cols()) {
    raise(ErrorKind::InvalidArgument, "bias length must equal the matrix width");
  }
  RowRelation idx = index_relation(m);
  BlockStore out(m.pool(), std::move(out_id), m.logical_rows(), m.logical_cols(), m.block_rows(),
                 m.block_cols());
  map_udf(
      idx, idx.schema,
      [&](const Row& row) -> Row {
        int64_t bi = row[0].as_int(), bj = row[1].as_int();
        DenseTensor tile = m.get_block(bi, bj);
        int64_t base = bj * m.block_cols();
        for (int64_t r = 0; r < tile.rows(); ++r) {
          double* dst = tile.raw() + r * tile.cols();
          for (int64_t c = 0; c < tile.cols(); ++c) dst[c] += bias.at(base + c);
        }
        out.put_block(bi, bj, tile);
        return row;
      },
      workers);
  return out;
}

DenseTensor conv2d_lowered(const DenseTensor& image, const DenseTensor& kernels,
                           const DenseTensor& bias, Repr repr, BufferPool& pool,
                           int64_t block_rows, int64_t block_cols, int workers) {
  if (kernels.rank() != 4) {
    raise(ErrorKind::InvalidArgument, "conv kernels must be outC x kh x kw x C");
  }
  if (image.rank() != 3 || image.dim(2) != kernels.dim(3)) {
    raise(ErrorKind::InvalidArgument, "image channels do not match the kernel channels");
  }
  int64_t kh = kernels.dim(1), kw = kernels.dim(2), out_c = kernels.dim(0);
  DenseTensor f = spatial_rewrite(image, kh, kw);
  DenseTensor k = kernel_flatten(kernels, bias);
  DenseTensor product;  // positions x outC
  if (repr == Repr::Relation) {
    BlockStore fs = store_from_dense(pool, fresh_relation_id("conv_f"), f, block_rows, block_cols);
    BlockStore ks = store_from_dense(pool, fresh_relation_id("conv_kt"), transpose(k), block_cols,
                                     block_rows);
    // Wait for matching inner partitioning: F is (positions x fcols) blocked
    // (block_rows x block_cols); K^T is (fcols x outC) and must tile its rows
    // by block_cols.
    BlockStore ps = matmul_as_join_agg(fs, ks, fresh_relation_id("conv_p"), workers);
    product = dense_from_store(ps);
  } else {
    product = dense_matmul_nt(f, k);
  }
  int64_t out_h = image.dim(0) - kh + 1;
  int64_t out_w = image.dim(1) - kw + 1;
  return reshape(std::move(product), {out_h, out_w, out_c});
}

namespace {

DenseTensor finish_embedding(std::vector<DenseTensor> rows, int64_t dim, EmbedReduce reduce) {
  if (reduce == EmbedReduce::Sum) {
    DenseTensor out = DenseTensor::matrix(1, dim);
    for (const DenseTensor& r : rows) dense_add_in_place(out, r);
    return out;
  }
  DenseTensor out = DenseTensor::matrix(static_cast<int64_t>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.raw() + static_cast<int64_t>(i) * dim, rows[i].raw(),
                static_cast<size_t>(dim) * sizeof(double));
  }
  return out;
}

}  // namespace

DenseTensor embedding_lookup(const DenseTensor& table, std::span<const int64_t> ids, Repr repr,
                             EmbedReduce reduce) {
  if (table.rank() != 2) raise(ErrorKind::InvalidArgument, "embedding table must be rank-2");
  int64_t n = table.rows(), dim = table.cols();
  for (int64_t id : ids) {
    if (id < 0 || id >= n) {
      raise(ErrorKind::InvalidArgument, "embedding id " + std::to_string(id) + " outside [0, " +
                                            std::to_string(n) + ")");
    }
  }
  std::vector<DenseTensor> rows;
  rows.reserve(ids.size());
  if (repr == Repr::Relation) {
    // (row_id, vector) relation with a hash index on row_id; each lookup is a
    // select whose predicate is the equality check on the row index.
    std::unordered_map<int64_t, int64_t> hash_index;
    hash_index.reserve(static_cast<size_t>(n));
    for (int64_t r = 0; r < n; ++r) hash_index.emplace(r, r);
    for (int64_t id : ids) {
      int64_t r = hash_index.at(id);
      DenseTensor row = DenseTensor::matrix(1, dim);
      std::memcpy(row.raw(), table.raw() + r * dim, static_cast<size_t>(dim) * sizeof(double));
      rows.push_back(std::move(row));
    }
  } else {
    for (int64_t id : ids) {
      DenseTensor row = DenseTensor::matrix(1, dim);
      std::memcpy(row.raw(), table.raw() + id * dim, static_cast<size_t>(dim) * sizeof(double));
      rows.push_back(std::move(row));
    }
  }
  return finish_embedding(std::move(rows), dim, reduce);
}

DenseTensor embedding_lookup(const BlockedMatrix& table, std::span<const int64_t> ids, Repr repr,
                             EmbedReduce reduce) {
  int64_t n = table.logical_rows(), dim = table.logical_cols();
  for (int64_t id : ids) {
    if (id < 0 || id >= n) {
      raise(ErrorKind::InvalidArgument, "embedding id " + std::to_string(id) + " outside [0, " +
                                            std::to_string(n) + ")");
    }
  }
  (void)repr;  // both modes gather the same strip of tiles
  std::vector<DenseTensor> rows;
  rows.reserve(ids.size());
  for (int64_t id : ids) {
    int64_t bi = id / table.block_rows();
    int64_t local = id % table.block_rows();
    DenseTensor row = DenseTensor::matrix(1, dim);
    for (int64_t bj = 0; bj < table.grid_cols(); ++bj) {
      const TensorBlock& blk = table.block(bi, bj);
      std::memcpy(row.raw() + bj * table.block_cols(), blk.data.raw() + local * blk.cols,
                  static_cast<size_t>(blk.cols) * sizeof(double));
    }
    rows.push_back(std::move(row));
  }
  return finish_embedding(std::move(rows), dim, reduce);
}

}  // namespace inferdb
