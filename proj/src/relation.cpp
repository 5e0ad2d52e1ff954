// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/relation.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <unordered_map>

namespace inferdb {

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::Int: return "int";
    case ColumnType::Float: return "float";
    case ColumnType::String: return "string";
  }
  return "unknown";
}

ColumnType column_type_from_name(std::string_view name) {
  if (name == "int") return ColumnType::Int;
  if (name == "float") return ColumnType::Float;
  if (name == "string") return ColumnType::String;
  raise(ErrorKind::InvalidArgument, "unknown column type: " + std::string(name));
}

std::string Value::to_text() const {
  switch (tag_) {
    case ColumnType::Int: return std::to_string(i_);
    case ColumnType::Float: {
      std::ostringstream os;
      os.precision(17);
      os << f_;
      return os.str();
    }
    case ColumnType::String: return *s_;
  }
  return "";
}

void RowRelation::validate() const {
  for (size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int>(rows[r].size()) != schema.arity()) {
      raise(ErrorKind::CorruptRelation,
            "row " + std::to_string(r) + " arity does not match the schema");
    }
    for (int c = 0; c < schema.arity(); ++c) {
      if (rows[r][static_cast<size_t>(c)].type() != schema.columns[static_cast<size_t>(c)].type) {
        raise(ErrorKind::CorruptRelation, "row " + std::to_string(r) + " column " +
                                              schema.columns[static_cast<size_t>(c)].name +
                                              " has the wrong type");
      }
    }
  }
  if (!key_columns.empty()) {
    struct KeyHash {
      size_t operator()(const Row& key) const {
        size_t h = 0;
        for (const Value& v : key) h = h * 1315423911ULL + v.hash();
        return h;
      }
    };
    std::unordered_map<Row, size_t, KeyHash> seen;
    for (size_t r = 0; r < rows.size(); ++r) {
      Row key;
      for (int c : key_columns) key.push_back(rows[r][static_cast<size_t>(c)]);
      auto [it, inserted] = seen.emplace(std::move(key), r);
      if (!inserted) {
        raise(ErrorKind::CorruptRelation, "duplicate key between rows " +
                                              std::to_string(it->second) + " and " +
                                              std::to_string(r));
      }
    }
  }
}

namespace {

struct KeyView {
  const Row* row;
  const std::vector<int>* cols;

  bool operator==(const KeyView& other) const {
    for (size_t i = 0; i < cols->size(); ++i) {
      if (!((*row)[static_cast<size_t>((*cols)[i])] ==
            (*other.row)[static_cast<size_t>((*other.cols)[i])])) {
        return false;
      }
    }
    return true;
  }
};

struct KeyViewHash {
  size_t operator()(const KeyView& k) const {
    size_t h = 0;
    for (int c : *k.cols) h = h * 1315423911ULL + (*k.row)[static_cast<size_t>(c)].hash();
    return h;
  }
};

int compare_keys(const Row& a, const std::vector<int>& a_cols, const Row& b,
                 const std::vector<int>& b_cols) {
  for (size_t i = 0; i < a_cols.size(); ++i) {
    int c = a[static_cast<size_t>(a_cols[i])].cmp(b[static_cast<size_t>(b_cols[i])]);
    if (c != 0) return c;
  }
  return 0;
}

}  // namespace

RowRelation equi_join(const RowRelation& left, const RowRelation& right,
                      const std::vector<int>& left_key, const std::vector<int>& right_key,
                      Schema out_schema, const RowCombiner& combiner, int workers) {
  if (left_key.empty() || left_key.size() != right_key.size()) {
    raise(ErrorKind::InvalidArgument, "join key column lists must be non-empty and equal-length");
  }
  for (size_t i = 0; i < left_key.size(); ++i) {
    ColumnType lt = left.schema.columns[static_cast<size_t>(left_key[i])].type;
    ColumnType rt = right.schema.columns[static_cast<size_t>(right_key[i])].type;
    if (lt != rt) {
      raise(ErrorKind::InvalidArgument,
            "join key type mismatch: " + std::string(to_string(lt)) + " vs " +
                std::string(to_string(rt)));
    }
  }

  // Build on the right, probe the left, then sort matches canonically.
  std::unordered_map<KeyView, std::vector<int64_t>, KeyViewHash> build;
  build.reserve(right.rows.size());
  for (int64_t r = 0; r < right.row_count(); ++r) {
    build[KeyView{&right.rows[static_cast<size_t>(r)], &right_key}].push_back(r);
  }
  std::vector<std::pair<int64_t, int64_t>> matches;
  for (int64_t l = 0; l < left.row_count(); ++l) {
    auto it = build.find(KeyView{&left.rows[static_cast<size_t>(l)], &left_key});
    if (it == build.end()) continue;
    for (int64_t r : it->second) matches.emplace_back(l, r);
  }
  std::sort(matches.begin(), matches.end(), [&](const auto& a, const auto& b) {
    int c = compare_keys(left.rows[static_cast<size_t>(a.first)], left_key,
                         left.rows[static_cast<size_t>(b.first)], left_key);
    if (c != 0) return c < 0;
    return a < b;
  });

  std::vector<Row> out_rows(matches.size());
  parallel_for(static_cast<int64_t>(matches.size()), workers, [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const auto& [l, r] = matches[static_cast<size_t>(i)];
      out_rows[static_cast<size_t>(i)] =
          combiner(left.rows[static_cast<size_t>(l)], right.rows[static_cast<size_t>(r)]);
    }
  });
  RowRelation out;
  out.schema = std::move(out_schema);
  out.rows = std::move(out_rows);
  return out;
}

RowRelation filter(const RowRelation& rel, const RowPredicate& predicate, int workers) {
  std::vector<std::vector<Row>> parts;
  int64_t n = rel.row_count();
  int64_t nparts = std::min<int64_t>(std::max(workers, 1), std::max<int64_t>(n, 1));
  parts.resize(static_cast<size_t>(nparts));
  int64_t chunk = (n + nparts - 1) / nparts;
  parallel_for(n, workers, [&](int64_t begin, int64_t end) {
    size_t part = static_cast<size_t>(begin / std::max<int64_t>(chunk, 1));
    for (int64_t i = begin; i < end; ++i) {
      const Row& row = rel.rows[static_cast<size_t>(i)];
      if (predicate(row)) parts[part].push_back(row);
    }
  });
  RowRelation out;
  out.schema = rel.schema;
  for (auto& part : parts) {
    for (auto& row : part) out.rows.push_back(std::move(row));
  }
  return out;
}

RowRelation map_udf(const RowRelation& rel, Schema out_schema, const RowUdf& udf, int workers) {
  std::vector<Row> out_rows(rel.rows.size());
  parallel_for(rel.row_count(), workers, [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      try {
        out_rows[static_cast<size_t>(i)] = udf(rel.rows[static_cast<size_t>(i)]);
      } catch (const EngineError& e) {
        raise(e.kind(), "udf failed on row " + std::to_string(i) + ": " + e.message());
      } catch (const std::exception& e) {
        raise(ErrorKind::InvalidArgument,
              "udf failed on row " + std::to_string(i) + ": " + e.what());
      }
    }
  });
  RowRelation out;
  out.schema = std::move(out_schema);
  out.rows = std::move(out_rows);
  return out;
}

namespace detail {

std::vector<int64_t> group_sorted_order(const RowRelation& rel, const std::vector<int>& group_cols,
                                        int tiebreak_col) {
  std::vector<int64_t> order(rel.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    int c = compare_key_at(rel, a, b, group_cols);
    if (c != 0) return c < 0;
    if (tiebreak_col >= 0) {
      return rel.rows[static_cast<size_t>(a)][static_cast<size_t>(tiebreak_col)].cmp(
                 rel.rows[static_cast<size_t>(b)][static_cast<size_t>(tiebreak_col)]) < 0;
    }
    return false;  // stable sort keeps input order
  });
  return order;
}

int compare_key_at(const RowRelation& rel, int64_t a, int64_t b,
                   const std::vector<int>& group_cols) {
  return compare_keys(rel.rows[static_cast<size_t>(a)], group_cols,
                      rel.rows[static_cast<size_t>(b)], group_cols);
}

}  // namespace detail

std::vector<uint8_t> encode_row_batch(const Schema& schema, const std::vector<Row>& rows) {
  std::vector<uint8_t> bytes;
  auto push_u64 = [&](uint64_t v) {
    size_t at = bytes.size();
    bytes.resize(at + 8);
    std::memcpy(bytes.data() + at, &v, 8);
  };
  push_u64(rows.size());
  push_u64(static_cast<uint64_t>(schema.arity()));
  for (const Row& row : rows) {
    for (const Value& v : row) {
      bytes.push_back(static_cast<uint8_t>(v.type()));
      switch (v.type()) {
        case ColumnType::Int: {
          int64_t i = v.as_int();
          push_u64(static_cast<uint64_t>(i));
          break;
        }
        case ColumnType::Float: {
          double f = v.as_float();
          uint64_t u;
          std::memcpy(&u, &f, 8);
          push_u64(u);
          break;
        }
        case ColumnType::String: {
          const std::string& s = v.as_string();
          push_u64(s.size());
          bytes.insert(bytes.end(), s.begin(), s.end());
          break;
        }
      }
    }
  }
  return bytes;
}

std::vector<Row> decode_row_batch(const Schema& schema, const std::vector<uint8_t>& bytes) {
  size_t at = 0;
  auto read_u64 = [&]() -> uint64_t {
    if (at + 8 > bytes.size()) raise(ErrorKind::CorruptRelation, "truncated row batch page");
    uint64_t v;
    std::memcpy(&v, bytes.data() + at, 8);
    at += 8;
    return v;
  };
  uint64_t n_rows = read_u64();
  uint64_t n_cols = read_u64();
  if (n_cols != static_cast<uint64_t>(schema.arity())) {
    raise(ErrorKind::CorruptRelation, "row batch arity disagrees with the schema");
  }
  std::vector<Row> rows;
  rows.reserve(n_rows);
  for (uint64_t r = 0; r < n_rows; ++r) {
    Row row;
    row.reserve(n_cols);
    for (uint64_t c = 0; c < n_cols; ++c) {
      if (at >= bytes.size()) raise(ErrorKind::CorruptRelation, "truncated row batch page");
      auto tag = static_cast<ColumnType>(bytes[at++]);
      switch (tag) {
        case ColumnType::Int:
          row.emplace_back(static_cast<int64_t>(read_u64()));
          break;
        case ColumnType::Float: {
          uint64_t u = read_u64();
          double f;
          std::memcpy(&f, &u, 8);
          row.emplace_back(f);
          break;
        }
        case ColumnType::String: {
          uint64_t len = read_u64();
          if (at + len > bytes.size()) raise(ErrorKind::CorruptRelation, "truncated row batch page");
          row.emplace_back(std::string(bytes.begin() + static_cast<int64_t>(at),
                                       bytes.begin() + static_cast<int64_t>(at + len)));
          at += len;
          break;
        }
        default:
          raise(ErrorKind::CorruptRelation, "unknown value tag in a row batch page");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace inferdb
