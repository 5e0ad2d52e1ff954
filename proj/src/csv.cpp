// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>

#include "inferdb/block_store.hpp"
#include "inferdb/errors.hpp"

namespace inferdb {

namespace {

constexpr int64_t kIngestBatchRows = 4096;

[[noreturn]] void row_error(int64_t data_row, const std::string& msg) {
  raise(ErrorKind::IngestError, "data row " + std::to_string(data_row) + ": " + msg);
}

/// Splits the file into records of fields; quoted fields use doubled-quote
/// escaping and may contain commas and newlines.
std::vector<std::vector<std::string>> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoError, "cannot open csv file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool record_started = false;
  auto end_field = [&]() {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&]() {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    record_started = false;
  };
  size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field.push_back(c);
      ++i;
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_started) {
          raise(ErrorKind::IngestError,
                "record " + std::to_string(records.size() + 1) + ": quote inside unquoted field");
        }
        in_quotes = true;
        field_started = true;
        record_started = true;
        ++i;
        break;
      case ',':
        end_field();
        record_started = true;
        ++i;
        break;
      case '\r':
        ++i;
        break;
      case '\n':
        if (record_started || field_started || !field.empty()) {
          end_record();
        }
        ++i;
        break;
      default:
        field.push_back(c);
        field_started = true;
        record_started = true;
        ++i;
        break;
    }
  }
  if (in_quotes) {
    raise(ErrorKind::IngestError, "unterminated quoted field at end of file");
  }
  if (record_started || field_started || !field.empty()) {
    end_record();
  }
  return records;
}

std::optional<int64_t> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  int64_t v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::optional<double> parse_float(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::vector<ColumnType> infer_schema(const std::vector<std::vector<std::string>>& records,
                                     size_t width) {
  std::vector<ColumnType> types(width, ColumnType::Int);
  for (size_t c = 0; c < width; ++c) {
    bool all_int = true;
    bool all_float = true;
    for (size_t r = 1; r < records.size(); ++r) {
      const std::string& cell = records[r][c];
      if (all_int && !parse_int(cell).has_value()) all_int = false;
      if (all_float && !parse_float(cell).has_value()) all_float = false;
      if (!all_int && !all_float) break;
    }
    types[c] = all_int ? ColumnType::Int : (all_float ? ColumnType::Float : ColumnType::String);
  }
  return types;
}

Value parse_cell(const std::string& cell, ColumnType type, int64_t data_row,
                 const std::string& column) {
  switch (type) {
    case ColumnType::Int: {
      auto v = parse_int(cell);
      if (!v.has_value()) {
        row_error(data_row, "value '" + cell + "' in column '" + column + "' does not parse as int");
      }
      return Value(*v);
    }
    case ColumnType::Float: {
      auto v = parse_float(cell);
      if (!v.has_value()) {
        row_error(data_row,
                  "value '" + cell + "' in column '" + column + "' does not parse as float");
      }
      return Value(*v);
    }
    case ColumnType::String: return Value(cell);
  }
  return Value();
}

}  // namespace

std::vector<int> feature_columns_of(const Schema& schema, const std::vector<int>& key_columns) {
  std::vector<int> features;
  for (int c = 0; c < schema.arity(); ++c) {
    if (schema.columns[static_cast<size_t>(c)].type == ColumnType::String) continue;
    bool is_key = false;
    for (int k : key_columns) {
      if (k == c) is_key = true;
    }
    if (!is_key) features.push_back(c);
  }
  return features;
}

TableEntry ingest_csv(const std::string& path, const CsvOptions& options, BufferPool* pool) {
  std::vector<std::vector<std::string>> records = read_records(path);
  if (records.empty()) {
    raise(ErrorKind::IngestError, "empty file, expected a header row: " + path);
  }
  const std::vector<std::string>& header = records[0];
  size_t width = header.size();
  for (size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      row_error(static_cast<int64_t>(r), "has " + std::to_string(records[r].size()) +
                                             " fields, expected " + std::to_string(width));
    }
  }

  std::vector<ColumnType> types;
  if (!options.schema.empty()) {
    if (options.schema.size() != width) {
      raise(ErrorKind::IngestError, "schema override has " + std::to_string(options.schema.size()) +
                                        " types for " + std::to_string(width) + " columns");
    }
    types = options.schema;
  } else {
    types = infer_schema(records, width);
  }

  TableEntry entry;
  for (size_t c = 0; c < width; ++c) {
    entry.schema.columns.push_back({header[c], types[c]});
  }
  for (const std::string& key : options.key_columns) {
    int idx = entry.schema.find(key);
    if (idx < 0) {
      raise(ErrorKind::IngestError, "key column '" + key + "' is not in the header");
    }
    entry.key_columns.push_back(idx);
  }
  entry.feature_columns = feature_columns_of(entry.schema, entry.key_columns);

  std::vector<Row> typed;
  typed.reserve(records.size() - 1);
  for (size_t r = 1; r < records.size(); ++r) {
    Row row;
    row.reserve(width);
    for (size_t c = 0; c < width; ++c) {
      row.push_back(parse_cell(records[r][c], types[c], static_cast<int64_t>(r), header[c]));
    }
    typed.push_back(std::move(row));
  }

  entry.data.schema = entry.schema;
  entry.data.key_columns = entry.key_columns;
  if (pool != nullptr) {
    // Stage rows through the pool in fixed batches so ingest respects the
    // same memory budget as execution.
    std::string rel = fresh_relation_id("ingest");
    int64_t n = static_cast<int64_t>(typed.size());
    int64_t batches = (n + kIngestBatchRows - 1) / kIngestBatchRows;
    for (int64_t b = 0; b < batches; ++b) {
      int64_t lo = b * kIngestBatchRows;
      int64_t hi = std::min(n, lo + kIngestBatchRows);
      std::vector<Row> batch(typed.begin() + lo, typed.begin() + hi);
      pool->put({rel, b, 0}, encode_row_batch(entry.schema, batch));
    }
    typed.clear();
    for (int64_t b = 0; b < batches; ++b) {
      PageBytes bytes = pool->get({rel, b, 0});
      std::vector<Row> batch = decode_row_batch(entry.schema, *bytes);
      for (Row& row : batch) entry.data.rows.push_back(std::move(row));
    }
    pool->drop_relation(rel);
  } else {
    entry.data.rows = std::move(typed);
  }
  entry.data.validate();
  return entry;
}

}  // namespace inferdb
