// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "inferdb/plan.hpp"

namespace inferdb {

/// Possibly table-qualified column name.
struct ColumnRef {
  std::string table;  // empty when unqualified
  std::string column;
  std::string text() const { return table.empty() ? column : table + "." + column; }
  bool operator==(const ColumnRef&) const = default;
};

struct Operand {
  enum class Kind { Column, Predict, IntLit, FloatLit, StringLit, BoolLit };
  Kind kind = Kind::Column;
  ColumnRef column;     // Column
  std::string model;    // Predict: model.predict(*)
  int64_t int_value = 0;
  double float_value = 0.0;
  std::string string_value;
  bool bool_value = false;
  std::string text() const;
  bool operator==(const Operand&) const = default;
};

struct Comparison {
  Operand lhs;
  CompareOp op = CompareOp::Eq;
  Operand rhs;
  bool operator==(const Comparison&) const = default;
};

struct SelectItem {
  enum class Kind { CountStar, Predict, Column };
  Kind kind = Kind::CountStar;
  std::string model;  // Predict
  ColumnRef column;   // Column
  bool operator==(const SelectItem&) const = default;
};

struct QueryAst {
  std::vector<SelectItem> select;
  std::vector<std::string> tables;  // one or two
  std::vector<Comparison> where;
  std::optional<ColumnRef> group_by;
  bool operator==(const QueryAst&) const = default;
};

/// Canonical text form; parse(render_query(ast)) == ast.
std::string render_query(const QueryAst& ast);

}  // namespace inferdb
