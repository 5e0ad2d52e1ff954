// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "inferdb/bench.hpp"
#include "inferdb/csv.hpp"
#include "inferdb/engine.hpp"

namespace {

using namespace inferdb;

CacheConfig parse_cache_flag(const std::string& text) {
  CacheConfig cc;
  if (text == "off") {
    cc.mode = CacheMode::Off;
    return cc;
  }
  if (text == "exact") {
    cc.mode = CacheMode::Exact;
    return cc;
  }
  if (text.rfind("approx:", 0) == 0) {
    cc.mode = CacheMode::Approx;
    try {
      size_t used = 0;
      cc.tau = std::stod(text.substr(7), &used);
      if (used != text.size() - 7) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      raise(ErrorKind::InvalidArgument, "cache flag tau does not parse: '" + text + "'");
    }
    return cc;
  }
  raise(ErrorKind::InvalidArgument,
        "cache flag must be off, exact, or approx:TAU, got '" + text + "'");
}

void parse_block_size(const std::string& text, EngineConfig& cfg) {
  size_t x = text.find('x');
  if (x == std::string::npos) {
    raise(ErrorKind::InvalidArgument, "block size must look like 1024x1024, got '" + text + "'");
  }
  try {
    size_t used1 = 0, used2 = 0;
    cfg.block_rows = std::stoll(text.substr(0, x), &used1);
    cfg.block_cols = std::stoll(text.substr(x + 1), &used2);
    if (used1 != x || used2 != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    raise(ErrorKind::InvalidArgument, "block size must look like 1024x1024, got '" + text + "'");
  }
}

std::vector<ColumnType> parse_schema_flag(const std::vector<std::string>& names) {
  std::vector<ColumnType> types;
  for (const std::string& t : names) {
    if (t == "int") {
      types.push_back(ColumnType::Int);
    } else if (t == "float") {
      types.push_back(ColumnType::Float);
    } else if (t == "string") {
      types.push_back(ColumnType::String);
    } else {
      raise(ErrorKind::InvalidArgument, "schema types are int, float, or string, got '" + t + "'");
    }
  }
  return types;
}

void print_relation(const RowRelation& rel) {
  for (size_t c = 0; c < rel.schema.columns.size(); ++c) {
    if (c > 0) std::cout << "\t";
    std::cout << rel.schema.columns[c].name;
  }
  std::cout << "\n";
  for (const Row& row : rel.rows) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c > 0) std::cout << "\t";
      std::cout << row[c].to_text();
    }
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inferdb: relational inference engine"};
  app.require_subcommand(1);

  EngineConfig cfg;
  std::string cache_flag = "off";
  std::string block_flag;
  std::string data_dir = "inferdb_data";
  app.add_option("--memory-threshold", cfg.memory_threshold_bytes,
                 "representation threshold in bytes")
      ->envname("INFERDB_MEMORY_THRESHOLD");
  app.add_option("--buffer-pool", cfg.buffer_pool_bytes, "buffer pool budget in bytes")
      ->envname("INFERDB_BUFFER_POOL");
  app.add_option("--block-size", block_flag, "tensor block geometry, ROWSxCOLS")
      ->envname("INFERDB_BLOCK_SIZE");
  app.add_option("--spill-dir", cfg.spill_dir, "spill directory for evicted blocks")
      ->envname("INFERDB_SPILL_DIR");
  app.add_option("--workers", cfg.workers, "worker thread count")->envname("INFERDB_WORKERS");
  app.add_option("--cache", cache_flag, "inference cache: off, exact, or approx:TAU")
      ->envname("INFERDB_CACHE");
  app.add_option("--seed", cfg.seed, "random seed")->envname("INFERDB_SEED");
  app.add_option("--data-dir", data_dir, "catalog directory; empty runs in memory")
      ->envname("INFERDB_DATA_DIR");

  auto* ingest = app.add_subcommand("ingest", "load a CSV file into a table");
  std::string ingest_table, ingest_csv_path;
  std::vector<std::string> schema_flag, keys_flag;
  ingest->add_option("--table", ingest_table, "table name")->required();
  ingest->add_option("--csv", ingest_csv_path, "CSV path")->required();
  ingest->add_option("--schema", schema_flag, "column types in header order")->delimiter(',');
  ingest->add_option("--keys", keys_flag, "key column names")->delimiter(',');

  auto* create_model = app.add_subcommand("create-model", "register a model from metadata");
  std::string model_name, model_meta;
  create_model->add_option("--name", model_name, "model name")->required();
  create_model->add_option("--meta", model_meta, "metadata JSON, or @path to a JSON file")
      ->required();

  auto* load_model = app.add_subcommand("load-model", "bind weights from a manifest");
  std::string load_name, manifest_path;
  load_model->add_option("--name", load_name, "model name")->required();
  load_model->add_option("--manifest", manifest_path, "manifest path")->required();

  auto* query = app.add_subcommand("query", "run a SQL query");
  std::string sql;
  bool explain_only = false;
  query->add_option("sql", sql, "query text")->required();
  query->add_flag("--explain", explain_only, "print the physical plan without executing");

  auto* bench = app.add_subcommand("bench", "run a benchmark suite");
  std::string suite, out_path, scratch = "bench_scratch";
  bench->add_option("--suite", suite, "one of: matmul conv optimizer pushdown oom cache e2e")
      ->required();
  bench->add_option("--out", out_path, "report file path")->required();
  bench->add_option("--scratch", scratch, "scratch directory for benchmark data");

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.cache = parse_cache_flag(cache_flag);
    if (!block_flag.empty()) parse_block_size(block_flag, cfg);

    if (*bench) {
      cfg.data_dir.clear();
      BenchReport report = run_bench_suite(suite, cfg, scratch);
      std::ofstream out(out_path, std::ios::trunc);
      if (!out) raise(ErrorKind::IoError, "cannot write report to " + out_path);
      out << report.full_text();
      out.flush();
      if (!out) raise(ErrorKind::IoError, "cannot write report to " + out_path);
      std::cout << "suite=" << report.suite << " passed=" << (report.passed ? "true" : "false")
                << " report=" << out_path << "\n";
      return report.passed ? 0 : 1;
    }

    cfg.data_dir = data_dir;
    Engine engine(cfg);
    if (*ingest) {
      CsvOptions opts;
      opts.schema = parse_schema_flag(schema_flag);
      opts.key_columns = keys_flag;
      int64_t rows = engine.ingest(ingest_table, ingest_csv_path, opts);
      std::cout << "ingested " << rows << " rows into " << ingest_table << "\n";
    } else if (*create_model) {
      engine.create_model(model_name, model_meta);
      std::cout << "registered model " << model_name << "\n";
    } else if (*load_model) {
      engine.load_model(load_name, manifest_path);
      std::cout << "loaded model " << load_name << "\n";
    } else if (*query) {
      if (explain_only) {
        std::cout << engine.explain_query(sql);
      } else {
        QueryResult result = engine.run_query(sql);
        print_relation(result.rows);
        std::cerr << result.report.deterministic_text() << result.report.info_text();
      }
    }
  } catch (const EngineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
