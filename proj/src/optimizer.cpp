// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/optimizer.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace inferdb {

void OptimizerConfig::validate() const {
  if (memory_threshold_bytes < 0) {
    raise(ErrorKind::InvalidArgument, "memory threshold must be nonnegative");
  }
  if (element_size_bytes <= 0) raise(ErrorKind::InvalidArgument, "element size must be positive");
  if (block_rows < 1 || block_cols < 1) {
    raise(ErrorKind::InvalidArgument, "block sizes must be at least 1");
  }
  if (pushdown_width_ratio <= 0.0) {
    raise(ErrorKind::InvalidArgument, "pushdown width ratio must be positive");
  }
}

namespace {

// Column-level view of the rows flowing at some plan edge, used for binding
// names, keys and feature columns.
struct BoundColumn {
  std::string table;
  std::string name;
  ColumnType type;
  bool is_key = false;
};

struct BoundSchema {
  std::vector<BoundColumn> cols;

  int resolve(const ColumnRef& ref) const {
    int found = -1;
    for (size_t i = 0; i < cols.size(); ++i) {
      if (cols[i].name != ref.column) continue;
      if (!ref.table.empty() && cols[i].table != ref.table) continue;
      if (found >= 0) {
        raise(ErrorKind::BindError, "column '" + ref.text() + "' is ambiguous");
      }
      found = static_cast<int>(i);
    }
    if (found < 0) raise(ErrorKind::BindError, "unknown column '" + ref.text() + "'");
    return found;
  }
};

BoundSchema schema_of_table(const std::string& name, const TableEntry& entry) {
  BoundSchema bound;
  bound.cols.reserve(entry.schema.arity());
  for (size_t i = 0; i < entry.schema.columns.size(); ++i) {
    bool key = std::find(entry.key_columns.begin(), entry.key_columns.end(),
                         static_cast<int>(i)) != entry.key_columns.end();
    bound.cols.push_back({name, entry.schema.columns[i].name, entry.schema.columns[i].type, key});
  }
  return bound;
}

Value literal_value(const Operand& op) {
  switch (op.kind) {
    case Operand::Kind::IntLit: return Value(op.int_value);
    case Operand::Kind::FloatLit: return Value(op.float_value);
    case Operand::Kind::StringLit: return Value(op.string_value);
    case Operand::Kind::BoolLit: return Value(static_cast<int64_t>(op.bool_value ? 1 : 0));
    default:
      raise(ErrorKind::BindError, "expected a literal, got " + op.text());
  }
}

CompareOp mirror(CompareOp op) {
  switch (op) {
    case CompareOp::Lt: return CompareOp::Gt;
    case CompareOp::Le: return CompareOp::Ge;
    case CompareOp::Gt: return CompareOp::Lt;
    case CompareOp::Ge: return CompareOp::Le;
    default: return op;  // = and != are symmetric
  }
}

bool is_literal(const Operand& op) {
  return op.kind == Operand::Kind::IntLit || op.kind == Operand::Kind::FloatLit ||
         op.kind == Operand::Kind::StringLit || op.kind == Operand::Kind::BoolLit;
}

}  // namespace

int append_model_chain(Plan& plan, int input_id, const Model& model, int segment) {
  const PlanNode& in = plan.node(input_id);
  if (in.out_cols != model.input.elements()) {
    raise(ErrorKind::PlanError, "model '" + model.name + "' expects " +
                                    std::to_string(model.input.elements()) +
                                    " features, input provides " + std::to_string(in.out_cols));
  }
  int64_t batch = in.out_rows;
  FlowShape shape = model.input;
  int cur = input_id;
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& layer = model.layers[li];
    auto tag = [&](PlanNode& n) {
      n.model = model.name;
      n.segment = segment;
      n.layer = static_cast<int>(li);
      n.repr = Repr::Unassigned;
      n.out_kind = ValueKind::Matrix;
      n.out_rows = batch;
    };
    switch (layer.kind) {
      case LayerKind::Dense: {
        PlanNode mm;
        mm.kind = PlanKind::MatMul;
        mm.inputs = {cur};
        mm.weight_rows = layer.units;
        mm.weight_cols = shape.width;
        if (model.weights_loaded) mm.weights = std::make_shared<DenseTensor>(layer.weights);
        tag(mm);
        mm.out_cols = layer.units;
        cur = plan.add(std::move(mm));

        PlanNode ab;
        ab.kind = PlanKind::AddBias;
        ab.inputs = {cur};
        if (model.weights_loaded) ab.bias = std::make_shared<DenseTensor>(layer.bias);
        tag(ab);
        ab.out_cols = layer.units;
        cur = plan.add(std::move(ab));

        if (layer.activation != Activation::Identity) {
          PlanNode act;
          act.kind = PlanKind::Activation;
          act.inputs = {cur};
          act.activation = layer.activation;
          tag(act);
          act.out_cols = layer.units;
          cur = plan.add(std::move(act));
        }
        shape = FlowShape::flat(layer.units);
        break;
      }
      case LayerKind::Conv2D: {
        PlanNode conv;
        conv.kind = PlanKind::Conv2D;
        conv.inputs = {cur};
        conv.in_h = shape.h;
        conv.in_w = shape.w;
        conv.in_c = shape.c;
        conv.kernel_h = layer.kernel_h;
        conv.kernel_w = layer.kernel_w;
        conv.out_channels = layer.out_channels;
        conv.activation = layer.activation;
        if (model.weights_loaded) {
          conv.weights = std::make_shared<DenseTensor>(layer.weights);
          conv.bias = std::make_shared<DenseTensor>(layer.bias);
        }
        int64_t oh = shape.h - layer.kernel_h + 1;
        int64_t ow = shape.w - layer.kernel_w + 1;
        conv.weight_rows = layer.out_channels;
        conv.weight_cols = layer.kernel_h * layer.kernel_w * shape.c + 1;
        tag(conv);
        conv.out_cols = oh * ow * layer.out_channels;
        cur = plan.add(std::move(conv));
        shape = FlowShape::volume(oh, ow, layer.out_channels);
        break;
      }
      case LayerKind::Flatten: {
        PlanNode fl;
        fl.kind = PlanKind::Flatten;
        fl.inputs = {cur};
        tag(fl);
        fl.out_cols = shape.elements();
        cur = plan.add(std::move(fl));
        shape = FlowShape::flat(fl.out_cols);
        break;
      }
      case LayerKind::Embedding: {
        PlanNode em;
        em.kind = PlanKind::EmbeddingLookup;
        em.inputs = {cur};
        em.dict_size = layer.dict_size;
        em.embed_dim = layer.dim;
        em.reduce = layer.reduce;
        if (model.weights_loaded) em.weights = std::make_shared<DenseTensor>(layer.weights);
        tag(em);
        em.out_cols = layer.reduce == EmbedReduce::Sum ? layer.dim : shape.width * layer.dim;
        cur = plan.add(std::move(em));
        shape = FlowShape::flat(em.out_cols);
        break;
      }
    }
  }
  return cur;
}

Plan build_ir(const QueryAst& query, const Catalog& catalog) {
  if (query.tables.empty() || query.tables.size() > 2) {
    raise(ErrorKind::PlanError, "a query reads one or two tables");
  }
  Plan plan;

  // Scans and the bound (possibly joined) schema.
  std::vector<BoundSchema> scan_schemas;
  std::vector<int> scan_ids;
  for (const std::string& name : query.tables) {
    const TableEntry& entry = catalog.table(name);
    PlanNode scan;
    scan.kind = PlanKind::TableScan;
    scan.table = name;
    scan.out_kind = ValueKind::Rows;
    scan.out_rows = static_cast<int64_t>(entry.data.rows.size());
    scan.out_cols = static_cast<int64_t>(entry.schema.arity());
    scan_ids.push_back(plan.add(std::move(scan)));
    scan_schemas.push_back(schema_of_table(name, entry));
  }

  // Partition the WHERE clause: the join condition, scalar predicates, and
  // predicate(s) over model.predict(*).
  std::vector<Comparison> scalar_preds;
  std::vector<Comparison> predict_preds;
  std::optional<Comparison> join_cond;
  for (Comparison cmp : query.where) {
    if (cmp.rhs.kind == Operand::Kind::Predict) {
      std::swap(cmp.lhs, cmp.rhs);
      cmp.op = mirror(cmp.op);
    }
    if (cmp.lhs.kind == Operand::Kind::Predict) {
      if (!is_literal(cmp.rhs)) {
        raise(ErrorKind::BindError, "predict(*) must be compared against a literal");
      }
      predict_preds.push_back(std::move(cmp));
      continue;
    }
    if (cmp.lhs.kind == Operand::Kind::Column && cmp.rhs.kind == Operand::Kind::Column) {
      if (query.tables.size() != 2) {
        raise(ErrorKind::BindError, "column-to-column comparison needs a two-table query");
      }
      if (cmp.op != CompareOp::Eq) {
        raise(ErrorKind::BindError, "join condition must be an equality");
      }
      if (join_cond) raise(ErrorKind::BindError, "only one join condition is supported");
      join_cond = std::move(cmp);
      continue;
    }
    if (cmp.lhs.kind != Operand::Kind::Column || !is_literal(cmp.rhs)) {
      raise(ErrorKind::BindError, "unsupported comparison shape in WHERE");
    }
    scalar_preds.push_back(std::move(cmp));
  }

  BoundSchema schema;
  int rows_id;
  if (query.tables.size() == 2) {
    if (!join_cond) {
      raise(ErrorKind::BindError, "two-table query requires an equality join condition");
    }
    // Resolve each side of the equality against one scan, in either order.
    int l = -1, r = -1;
    const ColumnRef& a = join_cond->lhs.column;
    const ColumnRef& b = join_cond->rhs.column;
    auto try_side = [&](const ColumnRef& ref, int side) -> int {
      try {
        int idx = scan_schemas[static_cast<size_t>(side)].resolve(ref);
        return idx;
      } catch (const EngineError&) {
        return -1;
      }
    };
    l = try_side(a, 0);
    r = try_side(b, 1);
    if (l < 0 || r < 0) {
      l = try_side(b, 0);
      r = try_side(a, 1);
    }
    if (l < 0 || r < 0) {
      raise(ErrorKind::BindError, "join condition does not name one column per table");
    }
    if (scan_schemas[0].cols[static_cast<size_t>(l)].type !=
        scan_schemas[1].cols[static_cast<size_t>(r)].type) {
      raise(ErrorKind::BindError, "join key types differ");
    }
    PlanNode join;
    join.kind = PlanKind::EquiJoin;
    join.combine = JoinCombine::ConcatRows;
    join.inputs = {scan_ids[0], scan_ids[1]};
    join.key_cols = {l};
    join.right_key_cols = {r};
    join.out_kind = ValueKind::Rows;
    join.out_rows = std::min(plan.node(scan_ids[0]).out_rows, plan.node(scan_ids[1]).out_rows);
    join.out_cols = plan.node(scan_ids[0]).out_cols + plan.node(scan_ids[1]).out_cols;
    rows_id = plan.add(std::move(join));
    schema = scan_schemas[0];
    schema.cols.insert(schema.cols.end(), scan_schemas[1].cols.begin(),
                       scan_schemas[1].cols.end());
  } else {
    if (join_cond) raise(ErrorKind::BindError, "join condition needs two tables");
    rows_id = scan_ids[0];
    schema = scan_schemas[0];
  }

  // Scalar selection runs before any inference.
  if (!scalar_preds.empty()) {
    PlanNode filter;
    filter.kind = PlanKind::Filter;
    filter.inputs = {rows_id};
    filter.out_kind = ValueKind::Rows;
    filter.out_rows = plan.node(rows_id).out_rows;
    filter.out_cols = plan.node(rows_id).out_cols;
    for (const Comparison& cmp : scalar_preds) {
      BoundPredicate pred;
      pred.column = schema.resolve(cmp.lhs.column);
      pred.op = cmp.op;
      pred.literal = literal_value(cmp.rhs);
      const BoundColumn& col = schema.cols[static_cast<size_t>(pred.column)];
      bool col_numeric = col.type != ColumnType::String;
      bool lit_numeric = pred.literal.type() != ColumnType::String;
      if (col_numeric != lit_numeric) {
        raise(ErrorKind::BindError,
              "type mismatch comparing column '" + col.name + "' with the literal");
      }
      filter.predicates.push_back(std::move(pred));
    }
    rows_id = plan.add(std::move(filter));
  }

  int group_col = -1;
  if (query.group_by) group_col = schema.resolve(*query.group_by);

  // At most one predict(*) call in the whole query.
  std::vector<std::string> predict_models;
  for (const SelectItem& item : query.select) {
    if (item.kind == SelectItem::Kind::Predict) predict_models.push_back(item.model);
  }
  for (const Comparison& cmp : predict_preds) predict_models.push_back(cmp.lhs.model);
  if (predict_models.size() > 1) {
    raise(ErrorKind::BindError, "at most one predict(*) call per query");
  }

  int model_tail = -1;
  if (!predict_models.empty()) {
    const Model& model = catalog.model(predict_models[0]);
    // predict(*) binds every numeric column except declared keys and the
    // group-by column, in schema order.
    PlanNode project;
    project.kind = PlanKind::Project;
    project.inputs = {rows_id};
    project.out_kind = ValueKind::Matrix;
    for (size_t i = 0; i < schema.cols.size(); ++i) {
      const BoundColumn& col = schema.cols[i];
      if (col.type == ColumnType::String || col.is_key || static_cast<int>(i) == group_col) {
        continue;
      }
      project.project_cols.push_back(static_cast<int>(i));
    }
    if (query.tables.size() == 2) {
      // Joined rows are identified by the join key.
      project.key_cols = plan.node(rows_id).kind == PlanKind::Filter
                             ? plan.node(plan.node(rows_id).inputs[0]).key_cols
                             : plan.node(rows_id).key_cols;
    } else {
      for (size_t i = 0; i < schema.cols.size(); ++i) {
        if (schema.cols[i].is_key) project.key_cols.push_back(static_cast<int>(i));
      }
    }
    project.out_rows = plan.node(rows_id).out_rows;
    project.out_cols = static_cast<int64_t>(project.project_cols.size());
    if (project.out_cols != model.input.elements()) {
      raise(ErrorKind::BindError, "model '" + model.name + "' expects " +
                                      std::to_string(model.input.elements()) +
                                      " features, the query provides " +
                                      std::to_string(project.out_cols));
    }
    int project_id = plan.add(std::move(project));
    model_tail = append_model_chain(plan, project_id, model, /*segment=*/0);
  }

  if (!predict_preds.empty()) {
    PlanNode filter;
    filter.kind = PlanKind::Filter;
    filter.inputs = {rows_id, model_tail};
    filter.out_kind = ValueKind::Rows;
    filter.out_rows = plan.node(rows_id).out_rows;
    filter.out_cols = plan.node(rows_id).out_cols;
    for (const Comparison& cmp : predict_preds) {
      BoundPredicate pred;
      pred.column = -1;
      pred.op = cmp.op;
      if (cmp.rhs.kind == Operand::Kind::StringLit) {
        raise(ErrorKind::BindError, "predict(*) compares against numeric or boolean literals");
      }
      pred.literal = literal_value(cmp.rhs);
      filter.predicates.push_back(std::move(pred));
    }
    rows_id = plan.add(std::move(filter));
  }

  const SelectItem& head = query.select.at(0);
  int output_id = -1;
  switch (head.kind) {
    case SelectItem::Kind::CountStar: {
      PlanNode agg;
      agg.kind = PlanKind::GroupAggregate;
      agg.inputs = {rows_id};
      agg.group_col = group_col;
      agg.out_kind = ValueKind::Rows;
      agg.out_rows = group_col >= 0 ? plan.node(rows_id).out_rows : 1;
      agg.out_cols = group_col >= 0 ? 2 : 1;
      output_id = plan.add(std::move(agg));
      break;
    }
    case SelectItem::Kind::Predict: {
      if (query.group_by) {
        raise(ErrorKind::BindError, "GROUP BY requires a count(*) select list");
      }
      output_id = model_tail;
      break;
    }
    case SelectItem::Kind::Column: {
      if (query.group_by) {
        raise(ErrorKind::BindError, "GROUP BY requires a count(*) select list");
      }
      PlanNode project;
      project.kind = PlanKind::Project;
      project.inputs = {rows_id};
      project.out_kind = ValueKind::Rows;
      for (const SelectItem& item : query.select) {
        if (item.kind != SelectItem::Kind::Column) {
          raise(ErrorKind::BindError, "mixed select list is not supported");
        }
        project.project_cols.push_back(schema.resolve(item.column));
      }
      project.out_rows = plan.node(rows_id).out_rows;
      project.out_cols = static_cast<int64_t>(project.project_cols.size());
      output_id = plan.add(std::move(project));
      break;
    }
  }
  plan.outputs = {output_id};
  return plan;
}

int64_t estimate_memory(const Plan& plan, const PlanNode& node, int64_t element_size_bytes) {
  if (node.out_rows < 0 || node.out_cols < 0) {
    raise(ErrorKind::PlanError,
          "node " + std::to_string(node.id) + " has an unresolved output shape");
  }
  int64_t elements = node.out_rows * node.out_cols;
  for (int in : node.inputs) {
    const PlanNode& input = plan.node(in);
    elements += input.out_rows * input.out_cols;
  }
  switch (node.kind) {
    case PlanKind::MatMul:
      elements += node.weight_rows * node.weight_cols;
      break;
    case PlanKind::AddBias:
      elements += node.out_cols;
      break;
    case PlanKind::EmbeddingLookup:
      elements += node.dict_size * node.embed_dim;
      break;
    case PlanKind::Conv2D: {
      // Counts the materialized im2col operand F and the flattened kernel
      // matrix, the inputs the lowered product actually reads.
      int64_t oh = node.in_h - node.kernel_h + 1;
      int64_t ow = node.in_w - node.kernel_w + 1;
      int64_t fcols = node.kernel_h * node.kernel_w * node.in_c + 1;
      int64_t positions = node.out_rows * oh * ow;
      elements = positions * fcols + node.out_channels * fcols + node.out_rows * node.out_cols;
      break;
    }
    default:
      break;
  }
  return elements * element_size_bytes;
}

namespace {

ValueKind expected_input_kind(const PlanNode& node, size_t slot) {
  switch (node.kind) {
    case PlanKind::TableScan:
      raise(ErrorKind::InvalidPlan, "TableScan takes no inputs");
    case PlanKind::Filter:
      return slot == 0 ? ValueKind::Rows : ValueKind::Matrix;
    case PlanKind::Project:
    case PlanKind::GroupAggregate:
      return ValueKind::Rows;
    case PlanKind::EquiJoin:
      return node.combine == JoinCombine::ConcatRows ? ValueKind::Rows : ValueKind::Matrix;
    case PlanKind::MapUDF:
    case PlanKind::ModelApply:
    case PlanKind::Conv2D:
    case PlanKind::EmbeddingLookup:
      return ValueKind::Matrix;
    case PlanKind::MatMul:
    case PlanKind::AddBias:
    case PlanKind::Activation:
    case PlanKind::Flatten:
      return node.repr == Repr::Relation ? ValueKind::Blocked : ValueKind::Matrix;
    case PlanKind::Reblock:
      return node.to_blocked ? ValueKind::Matrix : ValueKind::Blocked;
  }
  return ValueKind::Rows;
}

}  // namespace

void select_representation(Plan& plan, const OptimizerConfig& config) {
  config.validate();
  for (PlanNode& node : plan.nodes) {
    if (!is_linalg(node.kind)) continue;
    int64_t est = estimate_memory(plan, node, config.element_size_bytes);
    node.repr = est > config.memory_threshold_bytes ? Repr::Relation : Repr::Udf;
    bool blocked_out = node.repr == Repr::Relation &&
                       (node.kind == PlanKind::MatMul || node.kind == PlanKind::AddBias ||
                        node.kind == PlanKind::Activation || node.kind == PlanKind::Flatten);
    node.out_kind = blocked_out ? ValueKind::Blocked : ValueKind::Matrix;
  }
  // Adapters where dense and blocked values meet; one Reblock per converted
  // producer and direction.
  std::unordered_map<int64_t, int> made;  // producer id * 2 + to_blocked -> adapter id
  size_t original = plan.nodes.size();
  for (size_t vi = 0; vi < original; ++vi) {
    for (size_t slot = 0; slot < plan.nodes[vi].inputs.size(); ++slot) {
      PlanNode& v = plan.nodes[vi];
      const PlanNode& u = plan.node(v.inputs[slot]);
      ValueKind want = expected_input_kind(v, slot);
      ValueKind have = u.out_kind;
      bool to_blocked;
      if (have == ValueKind::Matrix && want == ValueKind::Blocked) {
        to_blocked = true;
      } else if (have == ValueKind::Blocked && want == ValueKind::Matrix) {
        to_blocked = false;
      } else {
        continue;
      }
      int64_t key = static_cast<int64_t>(u.id) * 2 + (to_blocked ? 1 : 0);
      auto it = made.find(key);
      int adapter_id;
      if (it != made.end()) {
        adapter_id = it->second;
      } else {
        PlanNode adapter;
        adapter.kind = PlanKind::Reblock;
        adapter.inputs = {u.id};
        adapter.to_blocked = to_blocked;
        adapter.repr = Repr::Relation;
        adapter.out_kind = to_blocked ? ValueKind::Blocked : ValueKind::Matrix;
        adapter.out_rows = u.out_rows;
        adapter.out_cols = u.out_cols;
        adapter.segment = u.segment >= 0 ? u.segment : v.segment;
        adapter.model = !u.model.empty() ? u.model : v.model;
        adapter_id = plan.add(std::move(adapter));
        made.emplace(key, adapter_id);
      }
      plan.nodes[vi].inputs[slot] = adapter_id;
    }
  }
}

bool pushdown_rewrite(Plan& plan, const OptimizerConfig& config) {
  config.validate();
  for (size_t probe = 0; probe < plan.nodes.size(); ++probe) {
    // Everything the rewrite needs is copied out before the plan grows, since
    // adding nodes invalidates references into the node vector.
    int mm_id, proj_id, join_id, left_id, right_id;
    int64_t left_arity, left_rows, right_rows, h, f1, f2;
    size_t split;
    std::vector<int> proj_cols, proj_keys, right_keys;
    std::string model_tag;
    int segment_tag, layer_tag;
    std::shared_ptr<const DenseTensor> weights;
    {
      const PlanNode& mm = plan.nodes[probe];
      if (mm.kind != PlanKind::MatMul || mm.inputs.size() != 1 || !mm.weights) continue;
      mm_id = mm.id;
      const PlanNode& proj = plan.node(mm.inputs[0]);
      if (proj.kind != PlanKind::Project || proj.out_kind != ValueKind::Matrix ||
          proj.inputs.size() != 1) {
        continue;
      }
      const PlanNode& join = plan.node(proj.inputs[0]);
      if (join.kind != PlanKind::EquiJoin || join.combine != JoinCombine::ConcatRows) continue;
      if (plan.consumers(join.id) != std::vector<int>{proj.id}) continue;
      if (plan.consumers(proj.id) != std::vector<int>{mm_id}) continue;

      proj_id = proj.id;
      join_id = join.id;
      left_id = join.inputs[0];
      right_id = join.inputs[1];
      left_arity = plan.node(left_id).out_cols;
      left_rows = plan.node(left_id).out_rows;
      right_rows = plan.node(right_id).out_rows;
      proj_cols = proj.project_cols;
      proj_keys = proj.key_cols;
      right_keys = join.right_key_cols;
      model_tag = mm.model;
      segment_tag = mm.segment;
      layer_tag = mm.layer;
      weights = mm.weights;
      h = mm.weight_rows;
    }
    (void)join_id;

    // Features must be the left table's columns followed by the right's.
    split = 0;
    while (split < proj_cols.size() && proj_cols[split] < left_arity) ++split;
    bool ordered = true;
    for (size_t i = split; i < proj_cols.size(); ++i) {
      if (proj_cols[i] < left_arity) ordered = false;
    }
    if (!ordered) continue;
    f1 = static_cast<int64_t>(split);
    f2 = static_cast<int64_t>(proj_cols.size()) - f1;
    if (f1 == 0 || f2 == 0) continue;  // degenerate split, keep the original
    if (static_cast<double>(h) > config.pushdown_width_ratio * static_cast<double>(f1 + f2)) {
      continue;
    }
    // The partial products meet again on the join key, so the key must be
    // carried on the left side of the projection.
    bool keys_left = !proj_keys.empty();
    for (int k : proj_keys) {
      if (k >= left_arity) keys_left = false;
    }
    if (!keys_left) continue;
    (void)proj_id;

    auto w1 = std::make_shared<DenseTensor>(DenseTensor::matrix(h, f1));
    auto w2 = std::make_shared<DenseTensor>(DenseTensor::matrix(h, f2));
    for (int64_t r = 0; r < h; ++r) {
      std::memcpy(w1->raw() + r * f1, weights->raw() + r * (f1 + f2),
                  static_cast<size_t>(f1) * 8);
      std::memcpy(w2->raw() + r * f2, weights->raw() + r * (f1 + f2) + f1,
                  static_cast<size_t>(f2) * 8);
    }

    PlanNode p1;
    p1.kind = PlanKind::Project;
    p1.inputs = {left_id};
    p1.out_kind = ValueKind::Matrix;
    p1.project_cols.assign(proj_cols.begin(), proj_cols.begin() + static_cast<int64_t>(split));
    p1.key_cols = proj_keys;
    p1.out_rows = left_rows;
    p1.out_cols = f1;
    int p1_id = plan.add(std::move(p1));

    PlanNode p2;
    p2.kind = PlanKind::Project;
    p2.inputs = {right_id};
    p2.out_kind = ValueKind::Matrix;
    for (size_t i = split; i < proj_cols.size(); ++i) {
      p2.project_cols.push_back(proj_cols[i] - static_cast<int>(left_arity));
    }
    p2.key_cols = right_keys;
    p2.out_rows = right_rows;
    p2.out_cols = f2;
    int p2_id = plan.add(std::move(p2));

    auto make_partial = [&](int input, std::shared_ptr<const DenseTensor> wpart, int64_t fpart,
                            int64_t rows) {
      PlanNode m;
      m.kind = PlanKind::MatMul;
      m.inputs = {input};
      m.weights = std::move(wpart);
      m.weight_rows = h;
      m.weight_cols = fpart;
      m.repr = Repr::Unassigned;
      m.out_kind = ValueKind::Matrix;
      m.out_rows = rows;
      m.out_cols = h;
      m.model = model_tag;
      m.segment = segment_tag;
      m.layer = layer_tag;
      return plan.add(std::move(m));
    };
    int m1_id = make_partial(p1_id, std::move(w1), f1, left_rows);
    int m2_id = make_partial(p2_id, std::move(w2), f2, right_rows);

    PlanNode sum_join;
    sum_join.kind = PlanKind::EquiJoin;
    sum_join.combine = JoinCombine::AddVectors;
    sum_join.inputs = {m1_id, m2_id};
    sum_join.out_kind = ValueKind::Matrix;
    sum_join.out_rows = std::min(left_rows, right_rows);
    sum_join.out_cols = h;
    sum_join.model = model_tag;
    sum_join.segment = segment_tag;
    int sum_id = plan.add(std::move(sum_join));

    for (PlanNode& n : plan.nodes) {
      for (int& in : n.inputs) {
        if (in == mm_id && n.id != sum_id) in = sum_id;
      }
    }
    for (int& out : plan.outputs) {
      if (out == mm_id) out = sum_id;
    }
    plan.compact();
    return true;
  }
  return false;
}

void fuse_udf_subgraphs(Plan& plan, const OptimizerConfig& config) {
  config.validate();
  std::vector<int> topo = plan.topo_order();
  std::vector<char> absorbed(plan.nodes.size(), 0);
  auto fusable = [&](int id) {
    return id < static_cast<int>(absorbed.size()) && !absorbed[static_cast<size_t>(id)] &&
           is_linalg(plan.node(id).kind) && plan.node(id).repr == Repr::Udf;
  };
  auto edge_small = [&](int producer) {
    const PlanNode& p = plan.node(producer);
    return p.out_rows * p.out_cols * config.element_size_bytes <
           config.memory_threshold_bytes;
  };

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    int seed = *it;
    if (!fusable(seed)) continue;
    if (plan.consumers(seed).size() > 1) continue;  // would have two egress edges

    // Grow upstream only through nodes whose every consumer is already in the
    // set, keeping the single egress edge at the seed.
    std::vector<int> members = {seed};
    std::unordered_set<int> in_set = {seed};
    bool grew = true;
    while (grew) {
      grew = false;
      for (int candidate : topo) {
        if (!fusable(candidate) || in_set.count(candidate)) continue;
        std::vector<int> consumers = plan.consumers(candidate);
        if (consumers.empty()) continue;
        bool all_inside = true;
        for (int c : consumers) {
          if (!in_set.count(c)) all_inside = false;
        }
        if (!all_inside || !edge_small(candidate)) continue;
        members.push_back(candidate);
        in_set.insert(candidate);
        grew = true;
      }
    }
    // Topological chain order within the fused UDF.
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      return std::find(topo.begin(), topo.end(), a) < std::find(topo.begin(), topo.end(), b);
    });

    PlanNode fused;
    fused.kind = PlanKind::MapUDF;
    fused.repr = Repr::Udf;
    fused.out_kind = ValueKind::Matrix;
    fused.out_rows = plan.node(seed).out_rows;
    fused.out_cols = plan.node(seed).out_cols;
    fused.segment = plan.node(seed).segment;
    fused.model = plan.node(seed).model;

    // Members are copied with inputs renumbered: nonnegative values index the
    // fused chain itself, -(slot+1) indexes the MapUDF's ingress inputs.
    std::unordered_map<int, int> local;  // original id -> local index
    for (size_t i = 0; i < members.size(); ++i) local[members[i]] = static_cast<int>(i);
    for (int member : members) {
      PlanNode copy = plan.node(member);
      for (int& in : copy.inputs) {
        auto inside = local.find(in);
        if (inside != local.end()) {
          in = inside->second;
          continue;
        }
        int slot = -1;
        for (size_t s = 0; s < fused.inputs.size(); ++s) {
          if (fused.inputs[s] == in) slot = static_cast<int>(s);
        }
        if (slot < 0) {
          slot = static_cast<int>(fused.inputs.size());
          fused.inputs.push_back(in);
        }
        in = -(slot + 1);
      }
      copy.id = local[member];
      fused.fused.push_back(std::move(copy));
    }

    int fused_id = plan.add(std::move(fused));
    for (PlanNode& n : plan.nodes) {
      if (n.id == fused_id) continue;
      for (int& in : n.inputs) {
        if (in == seed) in = fused_id;
      }
    }
    for (int& out : plan.outputs) {
      if (out == seed) out = fused_id;
    }
    for (int member : members) absorbed[static_cast<size_t>(member)] = 1;
  }
  plan.compact();
}

Plan optimize(Plan plan, const OptimizerConfig& config) {
  config.validate();
  if (config.pushdown_enabled) {
    while (pushdown_rewrite(plan, config)) {
    }
  }
  select_representation(plan, config);
  fuse_udf_subgraphs(plan, config);
  return plan;
}

ExecutablePlan lower_plan(Plan plan, const OptimizerConfig& config) {
  config.validate();
  plan.compact();
  for (const PlanNode& node : plan.nodes) {
    if (node.kind == PlanKind::ModelApply) {
      raise(ErrorKind::PlanError,
            "node " + std::to_string(node.id) + ": ModelApply was not expanded");
    }
    if (node.repr == Repr::Unassigned) {
      raise(ErrorKind::PlanError,
            "node " + std::to_string(node.id) + " has no representation assigned");
    }
    for (size_t slot = 0; slot < node.inputs.size(); ++slot) {
      const PlanNode& input = plan.node(node.inputs[slot]);
      ValueKind want = expected_input_kind(node, slot);
      if (input.out_kind != want) {
        raise(ErrorKind::PlanError, "node " + std::to_string(node.id) + " input " +
                                        std::to_string(slot) + " is " +
                                        std::string(to_string(input.out_kind)) + ", expected " +
                                        std::string(to_string(want)));
      }
    }
    if (node.kind == PlanKind::MatMul && !node.inputs.empty()) {
      const PlanNode& input = plan.node(node.inputs[0]);
      if (input.out_cols != node.weight_cols) {
        raise(ErrorKind::PlanError, "node " + std::to_string(node.id) + ": matmul input width " +
                                        std::to_string(input.out_cols) +
                                        " does not match weight width " +
                                        std::to_string(node.weight_cols));
      }
    }
  }
  ExecutablePlan out;
  out.order = plan.topo_order();
  out.plan = std::move(plan);
  return out;
}

std::string explain(const Plan& plan, int64_t element_size_bytes) {
  std::ostringstream out;
  for (const PlanNode& node : plan.nodes) {
    out << node.id << '\t' << to_string(node.kind) << '\t' << to_string(node.repr) << '\t'
        << estimate_memory(plan, node, element_size_bytes) << '\t' << node.out_shape_text()
        << '\n';
  }
  return out.str();
}

std::vector<ExplainRow> parse_explain(const std::string& text) {
  std::vector<ExplainRow> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5) {
      raise(ErrorKind::InvalidArgument,
            "explain line " + std::to_string(lineno) + " does not have 5 fields");
    }
    ExplainRow row;
    try {
      row.id = std::stoi(fields[0]);
      row.est_bytes = std::stoll(fields[3]);
    } catch (const std::exception&) {
      raise(ErrorKind::InvalidArgument,
            "explain line " + std::to_string(lineno) + " has non-numeric fields");
    }
    row.kind = fields[1];
    row.repr = fields[2];
    row.out_shape = fields[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace inferdb
