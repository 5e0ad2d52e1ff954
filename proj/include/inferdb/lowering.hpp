// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "inferdb/block_store.hpp"
#include "inferdb/relation.hpp"
#include "inferdb/tensor.hpp"

namespace inferdb {

/// How a linear-algebra operator executes: inside one opaque dense UDF, or
/// expanded into relational operators over tensor blocks.
enum class Repr { Unassigned, Udf, Relation };

std::string_view to_string(Repr repr);

enum class EmbedReduce { None, Sum };

/// Matrix product as an equi-join of the two block-index relations on
/// a.block_col_id == b.block_row_id (combining into per-pair partial-product
/// tasks) followed by a group aggregate keyed by (out_row, out_col) that sums
/// partial blocks in ascending inner-block order. Operands need matching
/// inner partitioning; the output grid is complete.
BlockStore matmul_as_join_agg(const BlockStore& a, const BlockStore& b, std::string out_id,
                              int workers = 1);
BlockedMatrix matmul_as_join_agg(const BlockedMatrix& a, const BlockedMatrix& b, BufferPool& pool,
                                 int workers = 1);

/// Matrix addition as an equi-join of the block-index relations on
/// (block_row_id, block_col_id); the combiner adds the paired tiles.
BlockStore add_as_join(const BlockStore& a, const BlockStore& b, std::string out_id,
                       int workers = 1);
BlockedMatrix add_as_join(const BlockedMatrix& a, const BlockedMatrix& b, BufferPool& pool,
                          int workers = 1);

/// Per-block activation over the block relation. Softmax needs whole rows in
/// one tile column-wise (block_cols == logical_cols); regrid first otherwise.
BlockStore activation_as_map(const BlockStore& m, Activation kind, std::string out_id,
                             int workers = 1);
BlockedMatrix activation_as_map(const BlockedMatrix& m, Activation kind, BufferPool& pool,
                                int workers = 1);

/// Broadcast row-vector add over the block relation: each tile (bi, bj) gets
/// the matching slice of the bias vector (length = logical_cols).
BlockStore add_bias_as_map(const BlockStore& m, const DenseTensor& bias, std::string out_id,
                           int workers = 1);

/// Convolution via spatial rewriting: F = flattened receptive fields,
/// K = flattened kernels (bias folded), output = F x K^T reshaped y-major to
/// (H-kh+1) x (W-kw+1) x outC. Udf computes the product densely; Relation
/// tiles F and K^T and runs the join+aggregate lowering.
DenseTensor conv2d_lowered(const DenseTensor& image, const DenseTensor& kernels,
                           const DenseTensor& bias, Repr repr, BufferPool& pool,
                           int64_t block_rows, int64_t block_cols, int workers = 1);

/// Embedding lookup. Udf gathers rows straight out of the table; Relation
/// filters a (row_id, vector) relation through a hash index on row_id. Both
/// produce identical output: ids x dim rows, or their sum when reduce = Sum.
DenseTensor embedding_lookup(const DenseTensor& table, std::span<const int64_t> ids, Repr repr,
                             EmbedReduce reduce);
DenseTensor embedding_lookup(const BlockedMatrix& table, std::span<const int64_t> ids, Repr repr,
                             EmbedReduce reduce);

}  // namespace inferdb
