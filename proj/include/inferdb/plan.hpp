// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "inferdb/lowering.hpp"
#include "inferdb/relation.hpp"
#include "inferdb/tensor.hpp"

namespace inferdb {

enum class PlanKind {
  TableScan,
  Filter,
  Project,
  EquiJoin,
  GroupAggregate,
  MapUDF,
  MatMul,
  AddBias,
  Activation,
  Conv2D,
  Flatten,
  EmbeddingLookup,
  Reblock,
  ModelApply,
};

std::string_view to_string(PlanKind kind);
PlanKind plan_kind_from_name(std::string_view name);

/// True for the linear-algebra kinds the representation rule applies to.
bool is_linalg(PlanKind kind);

/// What flows out of a node: relational rows, a dense row-major matrix with
/// optional carried keys, or a blocked matrix living in the buffer pool.
enum class ValueKind { Rows, Matrix, Blocked };

std::string_view to_string(ValueKind kind);

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CompareOp op);

/// Filter predicate bound to a column index of the node's row input, or to
/// the model prediction (column == -1, compared through its class label).
struct BoundPredicate {
  int column = -1;
  CompareOp op = CompareOp::Eq;
  Value literal;
};

enum class JoinCombine {
  ConcatRows,  // relational join, left row then right row
  AddVectors,  // push-down join, elementwise sum of partial output vectors
};

struct PlanNode {
  int id = -1;
  PlanKind kind = PlanKind::TableScan;
  std::vector<int> inputs;
  Repr repr = Repr::Relation;  // linear-algebra nodes start Unassigned
  ValueKind out_kind = ValueKind::Rows;
  int64_t out_rows = 0;
  int64_t out_cols = 0;

  std::string table;  // TableScan
  std::string model;  // ModelApply; carried as a tag on expanded layer nodes
  int segment = -1;   // model-expansion id, scopes the inference cache
  int layer = -1;     // model layer this node was expanded from

  std::vector<BoundPredicate> predicates;  // Filter
  std::vector<int> project_cols;           // Project: feature columns
  std::vector<int> key_cols;               // Project: carried keys; EquiJoin: left keys
  std::vector<int> right_key_cols;         // EquiJoin
  JoinCombine combine = JoinCombine::ConcatRows;
  int group_col = -1;  // GroupAggregate key column, -1 for a global count

  // Linear-algebra parameters. Weight tensors are bound inline; shape-only
  // plans keep them null and carry dimensions for estimation and EXPLAIN.
  std::shared_ptr<const DenseTensor> weights;
  std::shared_ptr<const DenseTensor> bias;
  int64_t weight_rows = 0, weight_cols = 0;  // MatMul W is [units x in], applied as X*W^T
  Activation activation = Activation::Identity;
  int64_t in_h = 0, in_w = 0, in_c = 0;                  // Conv2D input volume
  int64_t kernel_h = 0, kernel_w = 0, out_channels = 0;  // Conv2D
  EmbedReduce reduce = EmbedReduce::None;                // EmbeddingLookup
  int64_t dict_size = 0, embed_dim = 0;

  std::vector<PlanNode> fused;  // MapUDF: collapsed chain in topological order
  bool to_blocked = false;      // Reblock direction

  std::string out_shape_text() const;
};

struct Plan {
  std::vector<PlanNode> nodes;  // nodes[i].id == i
  std::vector<int> outputs;     // sink node ids

  PlanNode& node(int id);
  const PlanNode& node(int id) const;
  int add(PlanNode n);

  std::vector<int> consumers(int id) const;
  /// Topological order over live nodes; raises InvalidPlan on a cycle.
  std::vector<int> topo_order() const;
  /// Drops nodes unreachable from the outputs and renumbers ids into
  /// topological order.
  void compact();
};

}  // namespace inferdb
