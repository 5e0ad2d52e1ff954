// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "inferdb/executor.hpp"
#include "inferdb/optimizer.hpp"
#include "oracles.hpp"

using namespace inferdb;

namespace {

TableEntry make_table(std::mt19937_64& rng, const std::string& prefix, int64_t n, int nf) {
  TableEntry e;
  e.schema.columns = {{"id", ColumnType::Int}};
  for (int i = 0; i < nf; ++i) {
    e.schema.columns.push_back({prefix + std::to_string(i), ColumnType::Float});
  }
  e.key_columns = {0};
  for (int i = 1; i <= nf; ++i) e.feature_columns.push_back(i);
  e.data.schema = e.schema;
  e.data.key_columns = {0};
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int64_t r = 0; r < n; ++r) {
    Row row{Value(r)};
    for (int i = 0; i < nf; ++i) row.push_back(Value(dist(rng)));
    e.data.rows.push_back(std::move(row));
  }
  return e;
}

QueryAst predict_query(const std::string& model, std::vector<std::string> tables,
                       std::vector<Comparison> where = {}) {
  QueryAst q;
  SelectItem item;
  item.kind = SelectItem::Kind::Predict;
  item.model = model;
  q.select = {item};
  q.tables = std::move(tables);
  q.where = std::move(where);
  return q;
}

Comparison join_on_id(const std::string& t1, const std::string& t2) {
  Comparison c;
  c.lhs.kind = Operand::Kind::Column;
  c.lhs.column = {t1, "id"};
  c.op = CompareOp::Eq;
  c.rhs.kind = Operand::Kind::Column;
  c.rhs.column = {t2, "id"};
  return c;
}

int count_kind(const Plan& plan, PlanKind kind) {
  int n = 0;
  for (const PlanNode& node : plan.nodes) {
    if (node.kind == kind) ++n;
    for (const PlanNode& inner : node.fused) {
      if (inner.kind == kind) ++n;
    }
  }
  return n;
}

RowRelation run(const Plan& plan, const OptimizerConfig& cfg, const Catalog& cat,
                BufferPool& pool) {
  ExecutablePlan exec = lower_plan(plan, cfg);
  ExecContext ctx;
  ctx.catalog = &cat;
  ctx.pool = &pool;
  ctx.workers = 2;
  ctx.block_rows = cfg.block_rows;
  ctx.block_cols = cfg.block_cols;
  return result_relation(execute_plan(exec, ctx));
}

}  // namespace

TEST_CASE("config validation rejects nonsense knobs") {
  OptimizerConfig cfg;
  cfg.validate();
  cfg.memory_threshold_bytes = -1;
  CHECK_THROWS_AS(cfg.validate(), EngineError);
  cfg = OptimizerConfig{};
  cfg.block_rows = 0;
  CHECK_THROWS_AS(cfg.validate(), EngineError);
  cfg = OptimizerConfig{};
  cfg.pushdown_width_ratio = 0.0;
  CHECK_THROWS_AS(cfg.validate(), EngineError);
}

TEST_CASE("build_ir expands a predict query into tagged layer nodes") {
  std::mt19937_64 rng(61);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 16, 6));
  cat.register_model(
      testing::make_dense_model("m", 6, {{8, Activation::Relu}, {4, Activation::Softmax}}, rng));

  Plan plan = build_ir(predict_query("m", {"t"}), cat);
  CHECK(count_kind(plan, PlanKind::TableScan) == 1);
  CHECK(count_kind(plan, PlanKind::Project) == 1);
  CHECK(count_kind(plan, PlanKind::MatMul) == 2);
  CHECK(count_kind(plan, PlanKind::AddBias) == 2);
  CHECK(count_kind(plan, PlanKind::Activation) == 2);
  for (const PlanNode& node : plan.nodes) {
    if (!is_linalg(node.kind)) continue;
    CHECK(node.repr == Repr::Unassigned);
    CHECK(node.model == "m");
    CHECK(node.segment >= 0);
    CHECK(node.layer >= 0);
  }
  const PlanNode& sink = plan.node(plan.outputs.at(0));
  CHECK(sink.out_rows == 16);
  CHECK(sink.out_cols == 4);
}

TEST_CASE("build_ir rejects arity mismatches and joins without conditions") {
  std::mt19937_64 rng(62);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 4, 6));
  cat.register_table("u", make_table(rng, "g", 4, 6));
  cat.register_model(testing::make_dense_model("narrow", 5, {{2, Activation::Identity}}, rng));
  cat.register_model(testing::make_dense_model("wide", 12, {{2, Activation::Identity}}, rng));

  try {
    build_ir(predict_query("narrow", {"t"}), cat);
    CHECK(false);
  } catch (const EngineError& e) {
    CHECK(e.kind() == ErrorKind::BindError);
    CHECK(std::string(e.what()).find("expects 5 features") != std::string::npos);
  }
  CHECK_THROWS_AS(build_ir(predict_query("wide", {"t", "u"}), cat), EngineError);
}

TEST_CASE("memory estimates follow the elements-times-size rule exactly") {
  std::mt19937_64 rng(63);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 64, 6));
  cat.register_model(
      testing::make_dense_model("m", 6, {{8, Activation::Relu}, {4, Activation::Identity}}, rng));
  Plan plan = build_ir(predict_query("m", {"t"}), cat);
  for (const PlanNode& node : plan.nodes) {
    int64_t est = estimate_memory(plan, node);
    switch (node.kind) {
      case PlanKind::MatMul: {
        int64_t in = node.weight_cols;
        CHECK(est == matmul_est_bytes(64, in, node.weight_rows));
        break;
      }
      case PlanKind::AddBias:
        CHECK(est == (64 * node.out_cols * 2 + node.out_cols) * 8);
        break;
      case PlanKind::Activation:
        CHECK(est == 64 * node.out_cols * 2 * 8);
        break;
      default:
        break;
    }
  }
}

TEST_CASE("representation thresholds hit both extremes and insert reblocks") {
  std::mt19937_64 rng(64);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 64, 6));
  cat.register_model(
      testing::make_dense_model("m", 6, {{8, Activation::Relu}, {4, Activation::Identity}}, rng));
  Plan base = build_ir(predict_query("m", {"t"}), cat);

  Plan all_rel = base;
  OptimizerConfig cfg;
  cfg.memory_threshold_bytes = 0;
  select_representation(all_rel, cfg);
  for (const PlanNode& node : all_rel.nodes) {
    if (is_linalg(node.kind)) CHECK(node.repr == Repr::Relation);
  }
  CHECK(count_kind(all_rel, PlanKind::Reblock) >= 1);

  Plan all_udf = base;
  cfg.memory_threshold_bytes = INT64_MAX;
  select_representation(all_udf, cfg);
  for (const PlanNode& node : all_udf.nodes) {
    if (is_linalg(node.kind)) CHECK(node.repr == Repr::Udf);
  }
  CHECK(count_kind(all_udf, PlanKind::Reblock) == 0);

  // A threshold between the two layers' estimates splits the chain.
  Plan mixed = base;
  cfg.memory_threshold_bytes = 7000;
  select_representation(mixed, cfg);
  bool saw_rel = false, saw_udf = false;
  for (const PlanNode& node : mixed.nodes) {
    if (!is_linalg(node.kind)) continue;
    saw_rel |= node.repr == Repr::Relation;
    saw_udf |= node.repr == Repr::Udf;
  }
  CHECK(saw_rel);
  CHECK(saw_udf);
  CHECK(count_kind(mixed, PlanKind::Reblock) >= 2);
  lower_plan(mixed, cfg);  // adapters must leave a well-formed plan

  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  cfg.memory_threshold_bytes = INT64_MAX;
  RowRelation udf_out = run(all_udf, cfg, cat, pool);
  cfg.memory_threshold_bytes = 7000;
  RowRelation mixed_out = run(mixed, cfg, cat, pool);
  REQUIRE(udf_out.row_count() == mixed_out.row_count());
  for (int64_t r = 0; r < udf_out.row_count(); ++r) {
    for (int c = 1; c < udf_out.schema.arity(); ++c) {
      double a = udf_out.rows[r][c].as_float();
      double b = mixed_out.rows[r][c].as_float();
      CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("fusion collapses udf chains without changing a single bit") {
  std::mt19937_64 rng(65);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 32, 5));
  cat.register_model(testing::make_dense_model(
      "m", 5, {{9, Activation::Relu}, {6, Activation::Sigmoid}, {3, Activation::Softmax}}, rng));
  Plan plan = build_ir(predict_query("m", {"t"}), cat);
  OptimizerConfig cfg;
  cfg.memory_threshold_bytes = INT64_MAX;

  Plan unfused = plan;
  select_representation(unfused, cfg);
  Plan fused = unfused;
  fuse_udf_subgraphs(fused, cfg);
  CHECK(count_kind(fused, PlanKind::MapUDF) == 1);
  int loose_linalg = 0;
  for (const PlanNode& node : fused.nodes) {
    if (is_linalg(node.kind)) ++loose_linalg;
  }
  CHECK(loose_linalg == 0);

  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  RowRelation a = run(unfused, cfg, cat, pool);
  RowRelation b = run(fused, cfg, cat, pool);
  REQUIRE(a.row_count() == b.row_count());
  REQUIRE(a.schema.arity() == b.schema.arity());
  for (int64_t r = 0; r < a.row_count(); ++r) {
    for (int c = 0; c < a.schema.arity(); ++c) {
      CHECK(a.rows[r][c].cmp(b.rows[r][c]) == 0);
    }
  }
}

TEST_CASE("pushdown splits the weight matrix across the join") {
  std::mt19937_64 rng(66);
  Catalog cat;
  cat.register_table("d1", make_table(rng, "f", 40, 4));
  cat.register_table("d2", make_table(rng, "g", 40, 4));
  cat.register_model(testing::make_dense_model("m", 8, {{3, Activation::Sigmoid}}, rng));
  QueryAst q = predict_query("m", {"d1", "d2"}, {join_on_id("d1", "d2")});

  OptimizerConfig cfg;
  cfg.memory_threshold_bytes = INT64_MAX;
  Plan baseline = build_ir(q, cat);
  Plan rewritten = baseline;
  CHECK(pushdown_rewrite(rewritten, cfg));
  CHECK(count_kind(baseline, PlanKind::MatMul) == 1);
  CHECK(count_kind(rewritten, PlanKind::MatMul) == 2);
  bool saw_vector_join = false;
  for (const PlanNode& node : rewritten.nodes) {
    if (node.kind == PlanKind::EquiJoin && node.combine == JoinCombine::AddVectors) {
      saw_vector_join = true;
    }
  }
  CHECK(saw_vector_join);

  select_representation(baseline, cfg);
  select_representation(rewritten, cfg);
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  RowRelation want = run(baseline, cfg, cat, pool);
  RowRelation got = run(rewritten, cfg, cat, pool);
  REQUIRE(want.row_count() == 40);
  REQUIRE(got.row_count() == 40);
  for (int64_t r = 0; r < 40; ++r) {
    CHECK(got.rows[r][0].as_int() == want.rows[r][0].as_int());
    for (int c = 1; c < want.schema.arity(); ++c) {
      double a = got.rows[r][c].as_float();
      double b = want.rows[r][c].as_float();
      CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("pushdown respects the width-ratio gate and the enable switch") {
  std::mt19937_64 rng(67);
  Catalog cat;
  cat.register_table("d1", make_table(rng, "f", 8, 4));
  cat.register_table("d2", make_table(rng, "g", 8, 4));
  // 16 outputs versus 8 joined features: splitting would move more bytes
  // through the join than the features themselves.
  cat.register_model(testing::make_dense_model("fat", 8, {{16, Activation::Identity}}, rng));
  QueryAst q = predict_query("fat", {"d1", "d2"}, {join_on_id("d1", "d2")});
  OptimizerConfig cfg;

  Plan plan = build_ir(q, cat);
  CHECK_FALSE(pushdown_rewrite(plan, cfg));

  cfg.pushdown_width_ratio = 2.0;
  Plan loose = build_ir(q, cat);
  CHECK(pushdown_rewrite(loose, cfg));

  cfg.pushdown_width_ratio = 1.0;
  cfg.pushdown_enabled = false;
  cat.register_model(testing::make_dense_model("thin", 8, {{2, Activation::Identity}}, rng));
  Plan off = build_ir(predict_query("thin", {"d1", "d2"}, {join_on_id("d1", "d2")}), cat);
  Plan optimized = optimize(off, cfg);
  CHECK(count_kind(optimized, PlanKind::MatMul) == 1);
}

TEST_CASE("explain text parses back into the node table") {
  std::mt19937_64 rng(68);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 16, 6));
  cat.register_model(testing::make_dense_model("m", 6, {{4, Activation::Relu}}, rng));
  Plan plan = build_ir(predict_query("m", {"t"}), cat);
  OptimizerConfig cfg;
  select_representation(plan, cfg);

  std::string text = explain(plan);
  std::vector<ExplainRow> rows = parse_explain(text);
  REQUIRE(rows.size() == plan.nodes.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const PlanNode& node = plan.nodes[i];
    CHECK(rows[i].id == node.id);
    CHECK(rows[i].kind == to_string(node.kind));
    CHECK(rows[i].repr == to_string(node.repr));
    CHECK(rows[i].est_bytes == estimate_memory(plan, node));
    CHECK(rows[i].out_shape == node.out_shape_text());
  }
  CHECK_THROWS_AS(parse_explain("id\tonly two\tfields"), EngineError);
}

TEST_CASE("lowering rejects unassigned and model-apply leftovers") {
  std::mt19937_64 rng(69);
  Catalog cat;
  cat.register_table("t", make_table(rng, "f", 8, 3));
  cat.register_model(testing::make_dense_model("m", 3, {{2, Activation::Identity}}, rng));
  Plan plan = build_ir(predict_query("m", {"t"}), cat);
  OptimizerConfig cfg;
  CHECK_THROWS_AS(lower_plan(plan, cfg), EngineError);  // still UNASSIGNED
}
