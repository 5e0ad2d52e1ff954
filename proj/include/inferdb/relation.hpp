// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "inferdb/errors.hpp"
#include "inferdb/parallel.hpp"

namespace inferdb {

enum class ColumnType { Int, Float, String };

std::string_view to_string(ColumnType type);
ColumnType column_type_from_name(std::string_view name);

/// Tagged scalar kept at 16 bytes (strings are boxed) so wide feature rows
/// stay affordable to materialize.
class Value {
 public:
  Value() : tag_(ColumnType::Int) { i_ = 0; }
  Value(int64_t v) : tag_(ColumnType::Int) { i_ = v; }
  Value(double v) : tag_(ColumnType::Float) { f_ = v; }
  Value(std::string v) : tag_(ColumnType::String) { s_ = new std::string(std::move(v)); }
  Value(const char* v) : Value(std::string(v)) {}

  Value(const Value& other) { copy_from(other); }
  Value(Value&& other) noexcept : tag_(other.tag_) {
    i_ = other.i_;
    s_ = other.s_;
    f_ = other.f_;
    if (other.tag_ == ColumnType::String) other.s_ = nullptr;
  }
  Value& operator=(const Value& other) {
    if (this != &other) {
      destroy();
      copy_from(other);
    }
    return *this;
  }
  Value& operator=(Value&& other) noexcept {
    if (this != &other) {
      destroy();
      tag_ = other.tag_;
      i_ = other.i_;
      f_ = other.f_;
      s_ = other.s_;
      if (other.tag_ == ColumnType::String) other.s_ = nullptr;
    }
    return *this;
  }
  ~Value() { destroy(); }

  ColumnType type() const { return tag_; }
  bool is_int() const { return tag_ == ColumnType::Int; }
  bool is_float() const { return tag_ == ColumnType::Float; }
  bool is_string() const { return tag_ == ColumnType::String; }

  int64_t as_int() const {
    if (!is_int()) raise(ErrorKind::InvalidArgument, "value is not an int");
    return i_;
  }
  double as_float() const {
    if (!is_float()) raise(ErrorKind::InvalidArgument, "value is not a float");
    return f_;
  }
  const std::string& as_string() const {
    if (!is_string() || s_ == nullptr) raise(ErrorKind::InvalidArgument, "value is not a string");
    return *s_;
  }
  /// Int or float widened to double; used for feature extraction.
  double numeric() const {
    if (is_int()) return static_cast<double>(i_);
    if (is_float()) return f_;
    raise(ErrorKind::InvalidArgument, "string value used in a numeric context");
  }

  bool operator==(const Value& other) const { return cmp(other) == 0; }

  /// Total order: type tag first, then value. Join keys share one type by
  /// contract, so cross-type comparisons only arise in canonical sorting.
  int cmp(const Value& other) const {
    if (tag_ != other.tag_) return tag_ < other.tag_ ? -1 : 1;
    switch (tag_) {
      case ColumnType::Int: return i_ < other.i_ ? -1 : (i_ > other.i_ ? 1 : 0);
      case ColumnType::Float: return f_ < other.f_ ? -1 : (f_ > other.f_ ? 1 : 0);
      case ColumnType::String: {
        int c = s_->compare(*other.s_);
        return c < 0 ? -1 : (c > 0 ? 1 : 0);
      }
    }
    return 0;
  }

  size_t hash() const {
    switch (tag_) {
      case ColumnType::Int: return std::hash<int64_t>()(i_);
      case ColumnType::Float: return std::hash<double>()(f_);
      case ColumnType::String: return std::hash<std::string>()(*s_);
    }
    return 0;
  }

  std::string to_text() const;

 private:
  void destroy() {
    if (tag_ == ColumnType::String) delete s_;
    s_ = nullptr;
  }
  void copy_from(const Value& other) {
    tag_ = other.tag_;
    i_ = other.i_;
    f_ = other.f_;
    if (tag_ == ColumnType::String) s_ = new std::string(*other.s_);
  }

  ColumnType tag_;
  union {
    int64_t i_;
    double f_;
    std::string* s_;
  };
};

using Row = std::vector<Value>;

struct Column {
  std::string name;
  ColumnType type = ColumnType::Float;
};

struct Schema {
  std::vector<Column> columns;

  int arity() const { return static_cast<int>(columns.size()); }
  int find(std::string_view name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }
  int require(std::string_view name) const {
    int i = find(name);
    if (i < 0) raise(ErrorKind::BindError, "unknown column: " + std::string(name));
    return i;
  }
};

struct RowRelation {
  Schema schema;
  std::vector<Row> rows;
  std::vector<int> key_columns;  // declared unique keys, may be empty

  int64_t row_count() const { return static_cast<int64_t>(rows.size()); }

  /// Checks row arities, value types, and key uniqueness.
  void validate() const;
};

using RowCombiner = std::function<Row(const Row&, const Row&)>;
using RowPredicate = std::function<bool(const Row&)>;
using RowUdf = std::function<Row(const Row&)>;

/// Hash equi-join with canonical output order: matches sorted by key, then
/// left insertion index, then right insertion index. The combiner runs in that
/// order, once per match.
RowRelation equi_join(const RowRelation& left, const RowRelation& right,
                      const std::vector<int>& left_key, const std::vector<int>& right_key,
                      Schema out_schema, const RowCombiner& combiner, int workers = 1);

/// Order-preserving selection.
RowRelation filter(const RowRelation& rel, const RowPredicate& predicate, int workers = 1);

/// Order-preserving elementwise row transform; the engine treats the udf as
/// opaque. A udf failure is rethrown with the offending row index.
RowRelation map_udf(const RowRelation& rel, Schema out_schema, const RowUdf& udf,
                    int workers = 1);

namespace detail {
std::vector<int64_t> group_sorted_order(const RowRelation& rel, const std::vector<int>& group_cols,
                                        int tiebreak_col);
int compare_key_at(const RowRelation& rel, int64_t a, int64_t b,
                   const std::vector<int>& group_cols);
}  // namespace detail

/// Groups rows by `group_cols` and folds each group in ascending order of the
/// tiebreak column (input order when tiebreak_col < 0), making floating-point
/// folds reproducible across runs and worker counts. Output rows are emitted
/// in ascending key order, one per distinct key.
template <class Acc>
RowRelation group_aggregate(const RowRelation& rel, const std::vector<int>& group_cols,
                            int tiebreak_col, Schema out_schema, const Acc& initial,
                            const std::function<void(Acc&, const Row&)>& fold,
                            const std::function<Row(const Row& key, Acc&&)>& finalize,
                            int workers = 1) {
  std::vector<int64_t> order = detail::group_sorted_order(rel, group_cols, tiebreak_col);
  // Group boundaries in the sorted order.
  std::vector<std::pair<int64_t, int64_t>> groups;
  for (int64_t i = 0; i < static_cast<int64_t>(order.size());) {
    int64_t j = i + 1;
    while (j < static_cast<int64_t>(order.size()) &&
           detail::compare_key_at(rel, order[i], order[j], group_cols) == 0) {
      ++j;
    }
    groups.emplace_back(i, j);
    i = j;
  }
  std::vector<Row> out_rows(groups.size());
  parallel_for(static_cast<int64_t>(groups.size()), workers, [&](int64_t begin, int64_t end) {
    for (int64_t g = begin; g < end; ++g) {
      auto [lo, hi] = groups[static_cast<size_t>(g)];
      Acc acc = initial;
      for (int64_t i = lo; i < hi; ++i) {
        fold(acc, rel.rows[static_cast<size_t>(order[i])]);
      }
      Row key;
      const Row& first = rel.rows[static_cast<size_t>(order[lo])];
      for (int c : group_cols) key.push_back(first[static_cast<size_t>(c)]);
      out_rows[static_cast<size_t>(g)] = finalize(key, std::move(acc));
    }
  });
  RowRelation out;
  out.schema = std::move(out_schema);
  out.rows = std::move(out_rows);
  return out;
}

/// Internal codec for moving 4,096-row ingest batches through the buffer pool.
std::vector<uint8_t> encode_row_batch(const Schema& schema, const std::vector<Row>& rows);
std::vector<Row> decode_row_batch(const Schema& schema, const std::vector<uint8_t>& bytes);

}  // namespace inferdb
