// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <string>

#include "doctest.h"
#include "inferdb/csv.hpp"
#include "oracles.hpp"

using namespace inferdb;

namespace {

std::string write_file(const testing::TempDir& tmp, const std::string& name,
                       const std::string& content) {
  std::string path = tmp.sub(name);
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("types are inferred column by column") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "t.csv",
                                "id,amount,label,mixed\n"
                                "1,0.5,spam,7\n"
                                "2,3,ham,0.25\n"
                                "3,-1.25,x y,oops\n");
  TableEntry entry = ingest_csv(path, {});
  REQUIRE(entry.schema.arity() == 4);
  CHECK(entry.schema.columns[0].type == ColumnType::Int);
  CHECK(entry.schema.columns[1].type == ColumnType::Float);  // 3 parses as float too
  CHECK(entry.schema.columns[2].type == ColumnType::String);
  CHECK(entry.schema.columns[3].type == ColumnType::String);
  REQUIRE(entry.data.row_count() == 3);
  CHECK(entry.data.rows[1][1].as_float() == 3.0);
  CHECK(entry.data.rows[2][2].as_string() == "x y");
  // No declared keys: every numeric column is a feature.
  CHECK(entry.feature_columns == std::vector<int>{0, 1});
}

TEST_CASE("header-only files load as empty tables") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "empty.csv", "a,b,c\n");
  TableEntry entry = ingest_csv(path, {});
  CHECK(entry.schema.arity() == 3);
  CHECK(entry.data.row_count() == 0);
  // With no data every column infers as int, hence every column is a feature.
  CHECK(entry.feature_columns == std::vector<int>{0, 1, 2});
}

TEST_CASE("quoted fields keep commas, newlines and doubled quotes") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "q.csv",
                                "id,note\n"
                                "1,\"a,b\"\n"
                                "2,\"line one\nline two\"\n"
                                "3,\"she said \"\"hi\"\"\"\n"
                                "4,\"\"\n");
  TableEntry entry = ingest_csv(path, {});
  REQUIRE(entry.data.row_count() == 4);
  CHECK(entry.data.rows[0][1].as_string() == "a,b");
  CHECK(entry.data.rows[1][1].as_string() == "line one\nline two");
  CHECK(entry.data.rows[2][1].as_string() == "she said \"hi\"");
  CHECK(entry.data.rows[3][1].as_string() == "");
}

TEST_CASE("crlf and a missing trailing newline are tolerated") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "crlf.csv", "a,b\r\n1,2\r\n3,4");
  TableEntry entry = ingest_csv(path, {});
  REQUIRE(entry.data.row_count() == 2);
  CHECK(entry.data.rows[1][0].as_int() == 3);
  CHECK(entry.data.rows[1][1].as_int() == 4);
}

TEST_CASE("ragged rows raise with the one-based data row number") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "ragged.csv", "a,b\n1,2\n3\n");
  try {
    ingest_csv(path, {});
    CHECK(false);
  } catch (const EngineError& e) {
    CHECK(e.kind() == ErrorKind::IngestError);
    CHECK(std::string(e.what()).find("data row 2") != std::string::npos);
  }
}

TEST_CASE("schema overrides validate each cell and name the offender") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "s.csv", "id,score\n1,good\n2,bad\n");
  CsvOptions opts;
  opts.schema = {ColumnType::Int, ColumnType::Float};
  try {
    ingest_csv(path, opts);
    CHECK(false);
  } catch (const EngineError& e) {
    std::string msg = e.what();
    CHECK(msg.find("data row 1") != std::string::npos);
    CHECK(msg.find("'good'") != std::string::npos);
    CHECK(msg.find("'score'") != std::string::npos);
    CHECK(msg.find("float") != std::string::npos);
  }

  CsvOptions as_text;
  as_text.schema = {ColumnType::String, ColumnType::String};
  TableEntry entry = ingest_csv(path, as_text);
  CHECK(entry.data.rows[0][0].as_string() == "1");
  CHECK(entry.feature_columns.empty());

  CsvOptions short_schema;
  short_schema.schema = {ColumnType::Int};
  CHECK_THROWS_AS(ingest_csv(path, short_schema), EngineError);
}

TEST_CASE("key columns resolve by header name") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "k.csv", "id,day,f0\n1,3,0.5\n2,3,0.75\n");
  CsvOptions opts;
  opts.key_columns = {"id"};
  TableEntry entry = ingest_csv(path, opts);
  CHECK(entry.key_columns == std::vector<int>{0});
  CHECK(entry.feature_columns == std::vector<int>{1, 2});

  CsvOptions bad;
  bad.key_columns = {"uuid"};
  try {
    ingest_csv(path, bad);
    CHECK(false);
  } catch (const EngineError& e) {
    CHECK(std::string(e.what()).find("'uuid'") != std::string::npos);
  }
}

TEST_CASE("duplicate declared keys fail validation") {
  testing::TempDir tmp;
  std::string path = write_file(tmp, "dup.csv", "id,v\n1,2\n1,3\n");
  CsvOptions opts;
  opts.key_columns = {"id"};
  CHECK_THROWS_AS(ingest_csv(path, opts), EngineError);
}

TEST_CASE("missing files and stray quotes are reported") {
  testing::TempDir tmp;
  try {
    ingest_csv(tmp.sub("absent.csv"), {});
    CHECK(false);
  } catch (const EngineError& e) {
    CHECK(e.kind() == ErrorKind::IoError);
  }
  std::string unterminated = write_file(tmp, "u.csv", "a\n\"open\n");
  CHECK_THROWS_AS(ingest_csv(unterminated, {}), EngineError);
  std::string stray = write_file(tmp, "stray.csv", "a\nx\"y\n");
  CHECK_THROWS_AS(ingest_csv(stray, {}), EngineError);
}

TEST_CASE("large ingests batch through the buffer pool unchanged") {
  testing::TempDir tmp;
  std::string content = "id,f0\n";
  for (int i = 0; i < 10000; ++i) {
    content += std::to_string(i) + "," + std::to_string(i) + ".25\n";
  }
  std::string path = write_file(tmp, "big.csv", content);
  CsvOptions opts;
  opts.key_columns = {"id"};

  TableEntry direct = ingest_csv(path, opts);
  // One 4,096-row batch encodes to about 72 KiB, so a 128 KiB pool holds one
  // batch but never all three.
  BufferPool pool(128 * 1024, tmp.path() / "spill");
  TableEntry staged = ingest_csv(path, opts, &pool);
  REQUIRE(staged.data.row_count() == 10000);
  REQUIRE(direct.data.row_count() == 10000);
  for (int64_t r = 0; r < 10000; ++r) {
    CHECK(staged.data.rows[r][0].as_int() == direct.data.rows[r][0].as_int());
    CHECK(staged.data.rows[r][1].as_float() == direct.data.rows[r][1].as_float());
  }
  CHECK(pool.stats().spills > 0);
  // The staging relation is dropped afterwards, leaving no spill files.
  size_t leftovers = 0;
  for (const auto& e : std::filesystem::directory_iterator(tmp.path() / "spill")) {
    (void)e;
    ++leftovers;
  }
  CHECK(leftovers == 0);
}
