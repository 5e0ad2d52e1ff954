// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/plan.hpp"

#include <algorithm>
#include <unordered_map>

namespace inferdb {

std::string_view to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::TableScan: return "TableScan";
    case PlanKind::Filter: return "Filter";
    case PlanKind::Project: return "Project";
    case PlanKind::EquiJoin: return "EquiJoin";
    case PlanKind::GroupAggregate: return "GroupAggregate";
    case PlanKind::MapUDF: return "MapUDF";
    case PlanKind::MatMul: return "MatMul";
    case PlanKind::AddBias: return "AddBias";
    case PlanKind::Activation: return "Activation";
    case PlanKind::Conv2D: return "Conv2D";
    case PlanKind::Flatten: return "Flatten";
    case PlanKind::EmbeddingLookup: return "EmbeddingLookup";
    case PlanKind::Reblock: return "Reblock";
    case PlanKind::ModelApply: return "ModelApply";
  }
  return "unknown";
}

PlanKind plan_kind_from_name(std::string_view name) {
  static const std::pair<std::string_view, PlanKind> table[] = {
      {"TableScan", PlanKind::TableScan},
      {"Filter", PlanKind::Filter},
      {"Project", PlanKind::Project},
      {"EquiJoin", PlanKind::EquiJoin},
      {"GroupAggregate", PlanKind::GroupAggregate},
      {"MapUDF", PlanKind::MapUDF},
      {"MatMul", PlanKind::MatMul},
      {"AddBias", PlanKind::AddBias},
      {"Activation", PlanKind::Activation},
      {"Conv2D", PlanKind::Conv2D},
      {"Flatten", PlanKind::Flatten},
      {"EmbeddingLookup", PlanKind::EmbeddingLookup},
      {"Reblock", PlanKind::Reblock},
      {"ModelApply", PlanKind::ModelApply},
  };
  for (const auto& [text, kind] : table) {
    if (text == name) return kind;
  }
  raise(ErrorKind::InvalidPlan, "unknown plan node kind '" + std::string(name) + "'");
}

bool is_linalg(PlanKind kind) {
  switch (kind) {
    case PlanKind::MatMul:
    case PlanKind::AddBias:
    case PlanKind::Activation:
    case PlanKind::Conv2D:
    case PlanKind::Flatten:
    case PlanKind::EmbeddingLookup:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Rows: return "rows";
    case ValueKind::Matrix: return "dense";
    case ValueKind::Blocked: return "blocked";
  }
  return "unknown";
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

std::string PlanNode::out_shape_text() const {
  return std::string(to_string(out_kind)) + ":" + std::to_string(out_rows) + "x" +
         std::to_string(out_cols);
}

PlanNode& Plan::node(int id) {
  if (id < 0 || id >= static_cast<int>(nodes.size())) {
    raise(ErrorKind::InvalidPlan, "plan node id " + std::to_string(id) + " out of range");
  }
  return nodes[static_cast<size_t>(id)];
}

const PlanNode& Plan::node(int id) const { return const_cast<Plan*>(this)->node(id); }

int Plan::add(PlanNode n) {
  n.id = static_cast<int>(nodes.size());
  nodes.push_back(std::move(n));
  return nodes.back().id;
}

std::vector<int> Plan::consumers(int id) const {
  std::vector<int> out;
  for (const PlanNode& n : nodes) {
    if (std::find(n.inputs.begin(), n.inputs.end(), id) != n.inputs.end()) out.push_back(n.id);
  }
  return out;
}

std::vector<int> Plan::topo_order() const {
  size_t n = nodes.size();
  std::vector<int> indegree(n, 0);
  for (const PlanNode& node : nodes) {
    for (int in : node.inputs) {
      if (in < 0 || in >= static_cast<int>(n)) {
        raise(ErrorKind::InvalidPlan, "node " + std::to_string(node.id) +
                                          " references missing input " + std::to_string(in));
      }
      ++indegree[static_cast<size_t>(node.id)];
    }
  }
  // Kahn's algorithm, smallest id first for a stable order.
  std::vector<int> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
  }
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(), std::greater<int>());
    int id = ready.back();
    ready.pop_back();
    order.push_back(id);
    for (const PlanNode& consumer : nodes) {
      if (std::find(consumer.inputs.begin(), consumer.inputs.end(), id) !=
          consumer.inputs.end()) {
        int count = static_cast<int>(
            std::count(consumer.inputs.begin(), consumer.inputs.end(), id));
        indegree[static_cast<size_t>(consumer.id)] -= count;
        if (indegree[static_cast<size_t>(consumer.id)] == 0) ready.push_back(consumer.id);
      }
    }
  }
  if (order.size() != n) raise(ErrorKind::InvalidPlan, "plan graph contains a cycle");
  return order;
}

void Plan::compact() {
  // Mark reachability from the outputs.
  std::vector<bool> live(nodes.size(), false);
  std::vector<int> stack(outputs.begin(), outputs.end());
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    if (id < 0 || id >= static_cast<int>(nodes.size()) || live[static_cast<size_t>(id)]) continue;
    live[static_cast<size_t>(id)] = true;
    for (int in : node(id).inputs) stack.push_back(in);
  }
  std::vector<int> order = topo_order();
  std::unordered_map<int, int> remap;
  std::vector<PlanNode> compacted;
  for (int id : order) {
    if (!live[static_cast<size_t>(id)]) continue;
    remap[id] = static_cast<int>(compacted.size());
    compacted.push_back(std::move(nodes[static_cast<size_t>(id)]));
  }
  for (size_t i = 0; i < compacted.size(); ++i) {
    compacted[i].id = static_cast<int>(i);
    for (int& in : compacted[i].inputs) in = remap.at(in);
  }
  for (int& out : outputs) out = remap.at(out);
  nodes = std::move(compacted);
}

}  // namespace inferdb
