// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "inferdb/ast.hpp"
#include "inferdb/model.hpp"
#include "inferdb/plan.hpp"

namespace inferdb {

struct OptimizerConfig {
  // Operators estimated above the threshold run relation-centric, the rest
  // UDF-centric. 0 forces RELATION everywhere, a huge value forces UDF.
  int64_t memory_threshold_bytes = 2147483648;
  int64_t element_size_bytes = 8;
  int64_t block_rows = 1024;
  int64_t block_cols = 1024;
  bool pushdown_enabled = true;
  double pushdown_width_ratio = 1.0;  // alpha: rewrite when h <= alpha * (f1 + f2)

  void validate() const;
};

/// Translates a bound query into the unified IR: scans, joins and filters as
/// relational nodes, model applications expanded into per-layer linear
/// algebra nodes with UNASSIGNED representations.
Plan build_ir(const QueryAst& query, const Catalog& catalog);

/// Appends the model's layer chain reading from `input_id` (a Matrix-valued
/// node); returns the chain's tail node id. Exposed for plan-level tests.
int append_model_chain(Plan& plan, int input_id, const Model& model, int segment);

/// Input elements plus output elements times the element size, exactly.
int64_t estimate_memory(const Plan& plan, const PlanNode& node, int64_t element_size_bytes = 8);

/// Annotates every linear-algebra node UDF or RELATION by the threshold rule
/// and inserts Reblock adapters where dense and blocked values meet.
void select_representation(Plan& plan, const OptimizerConfig& config);

/// Splits a MatMul-over-join of concatenated features into per-side partial
/// products joined by vector addition. Returns true when the rewrite fired;
/// plans without the pattern are returned unchanged.
bool pushdown_rewrite(Plan& plan, const OptimizerConfig& config);

/// Collapses maximal single-egress subgraphs of UDF-annotated linear-algebra
/// nodes with sub-threshold edges into single MapUDF nodes.
void fuse_udf_subgraphs(Plan& plan, const OptimizerConfig& config);

/// The full rewrite pipeline: pushdown, representation selection, fusion.
Plan optimize(Plan plan, const OptimizerConfig& config);

struct ExecutablePlan {
  Plan plan;
  std::vector<int> order;  // topological execution order
};

/// Validates annotations and shapes and freezes the execution order. Residual
/// ModelApply or UNASSIGNED nodes are plan errors.
ExecutablePlan lower_plan(Plan plan, const OptimizerConfig& config);

/// One line per node: node_id, kind, representation, est_bytes, out_shape,
/// tab-separated.
std::string explain(const Plan& plan, int64_t element_size_bytes = 8);

struct ExplainRow {
  int id = 0;
  std::string kind;
  std::string repr;
  int64_t est_bytes = 0;
  std::string out_shape;
  bool operator==(const ExplainRow&) const = default;
};

std::vector<ExplainRow> parse_explain(const std::string& text);

}  // namespace inferdb
