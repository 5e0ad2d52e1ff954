// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cstring>
#include <filesystem>
#include <random>
#include <unordered_map>

#include "doctest.h"
#include "inferdb/block_store.hpp"
#include "inferdb/buffer_pool.hpp"
#include "oracles.hpp"

using namespace inferdb;
namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> payload(uint64_t seed, size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<uint8_t> v(n);
  for (auto& b : v) b = static_cast<uint8_t>(rng());
  return v;
}

size_t spill_file_count(const fs::path& dir) {
  size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".blk") ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("pool trace agrees with an in-memory map oracle") {
  testing::TempDir tmp;
  BufferPool pool(64 * 1024, tmp.path() / "spill");
  std::unordered_map<std::string, std::vector<uint8_t>> oracle;
  std::vector<BlockKey> keys;
  std::mt19937_64 rng(31);
  for (int k = 0; k < 60; ++k) {
    keys.push_back({"rel" + std::to_string(k % 5), k / 5, k % 3});
  }
  auto name = [](const BlockKey& k) {
    return k.relation_id + "/" + std::to_string(k.block_row) + "/" + std::to_string(k.block_col);
  };
  for (int op = 0; op < 10000; ++op) {
    const BlockKey& key = keys[rng() % keys.size()];
    if (rng() % 3 == 0 || !oracle.count(name(key))) {
      auto bytes = payload(rng(), 512 + rng() % 4096);
      oracle[name(key)] = bytes;
      pool.put(key, std::move(bytes));
    } else {
      PageBytes got = pool.get(key);
      REQUIRE(got != nullptr);
      const auto& want = oracle.at(name(key));
      REQUIRE(got->size() == want.size());
      CHECK(std::memcmp(got->data(), want.data(), want.size()) == 0);
    }
  }
  BufferPoolStats st = pool.stats();
  // 60 keys of about 2.5 KiB each cannot all stay under a 64 KiB budget.
  CHECK(st.evictions > 0);
  CHECK(st.spills > 0);
  CHECK(st.peak_resident_bytes <= pool.budget_bytes());
  CHECK(spill_file_count(tmp.path() / "spill") > 0);
  // Every key must still be readable, spilled or not.
  for (const BlockKey& key : keys) {
    if (!oracle.count(name(key))) continue;
    PageBytes got = pool.get(key);
    REQUIRE(got != nullptr);
    CHECK(*got == oracle.at(name(key)));
  }
}

TEST_CASE("missing pages raise and contains answers without io") {
  testing::TempDir tmp;
  BufferPool pool(1024, tmp.path() / "spill");
  BlockKey key{"r", 0, 0};
  CHECK_FALSE(pool.contains(key));
  CHECK_THROWS_AS(pool.get(key), EngineError);
  pool.put(key, payload(1, 100));
  CHECK(pool.contains(key));
}

TEST_CASE("pinned pages survive a storm of larger pages") {
  testing::TempDir tmp;
  BufferPool pool(8 * 1024, tmp.path() / "spill");
  BlockKey pinned{"keep", 0, 0};
  auto keep = payload(7, 1024);
  pool.put(pinned, std::vector<uint8_t>(keep));
  pool.pin(pinned);
  for (int i = 0; i < 50; ++i) {
    pool.put({"junk", i, 0}, payload(100 + i, 2048));
  }
  // The pinned page never left memory, so reading it is a hit, not a reload.
  BufferPoolStats before = pool.stats();
  PageBytes got = pool.get(pinned);
  BufferPoolStats after = pool.stats();
  CHECK(*got == keep);
  CHECK(after.hits == before.hits + 1);
  CHECK(after.misses == before.misses);
  pool.unpin(pinned);
}

TEST_CASE("oversized pin demand exhausts the budget") {
  testing::TempDir tmp;
  BufferPool pool(4 * 1024, tmp.path() / "spill");
  pool.put({"a", 0, 0}, payload(1, 3000));
  pool.pin({"a", 0, 0});
  CHECK_THROWS_AS(pool.put({"b", 0, 0}, payload(2, 3000)), EngineError);
  pool.unpin({"a", 0, 0});
  pool.put({"b", 0, 0}, payload(2, 3000));
  CHECK(pool.get({"b", 0, 0}) != nullptr);
}

TEST_CASE("drop relation removes pages and spill files") {
  testing::TempDir tmp;
  BufferPool pool(4 * 1024, tmp.path() / "spill");
  for (int i = 0; i < 8; ++i) pool.put({"gone", i, 0}, payload(i, 1500));
  for (int i = 0; i < 3; ++i) pool.put({"stay", i, 0}, payload(50 + i, 800));
  CHECK(spill_file_count(tmp.path() / "spill") > 0);
  pool.drop_relation("gone");
  for (int i = 0; i < 8; ++i) CHECK_FALSE(pool.contains({"gone", i, 0}));
  for (const auto& e : fs::directory_iterator(tmp.path() / "spill")) {
    CHECK(e.path().filename().string().rfind("gone_", 0) != 0);
  }
  for (int i = 0; i < 3; ++i) CHECK(pool.get({"stay", i, 0}) != nullptr);
}

TEST_CASE("block codec round trips tensors bit for bit") {
  std::mt19937_64 rng(33);
  for (auto [r, c] : std::vector<std::pair<int64_t, int64_t>>{{1, 1}, {3, 7}, {64, 64}, {17, 1}}) {
    DenseTensor t = testing::random_matrix(rng, r, c);
    DenseTensor back = decode_block(encode_block(t));
    CHECK(testing::bitwise_equal(t, back));
  }
  std::vector<uint8_t> junk(11, 0);
  CHECK_THROWS_AS(decode_block(junk), EngineError);
}

TEST_CASE("block store round trips dense and ragged grids") {
  testing::TempDir tmp;
  BufferPool pool(1 << 20, tmp.path() / "spill");
  std::mt19937_64 rng(34);
  for (auto [r, c, br, bc] : std::vector<std::array<int64_t, 4>>{
           {10, 10, 3, 4}, {64, 64, 64, 64}, {5, 7, 2, 3}, {1, 1, 1, 1}}) {
    DenseTensor t = testing::random_matrix(rng, r, c);
    BlockStore store = store_from_dense(pool, fresh_relation_id("t"), t, br, bc);
    CHECK(store.grid_rows() == (r + br - 1) / br);
    CHECK(store.grid_cols() == (c + bc - 1) / bc);
    CHECK(testing::bitwise_equal(dense_from_store(store), t));
    BlockedMatrix blocked = blocked_from_store(store);
    BlockStore store2 = store_from_blocked(pool, fresh_relation_id("t"), blocked);
    CHECK(testing::bitwise_equal(dense_from_store(store2), t));
  }
}

TEST_CASE("regrid matches a direct re-partition") {
  testing::TempDir tmp;
  BufferPool pool(1 << 20, tmp.path() / "spill");
  std::mt19937_64 rng(35);
  DenseTensor t = testing::random_matrix(rng, 23, 31);
  BlockStore a = store_from_dense(pool, fresh_relation_id("a"), t, 4, 9);
  BlockStore b = regrid(a, fresh_relation_id("b"), 7, 5);
  CHECK(b.block_rows() == 7);
  CHECK(b.block_cols() == 5);
  CHECK(testing::bitwise_equal(dense_from_store(b), t));
  BlockStore direct = store_from_dense(pool, fresh_relation_id("c"), t, 7, 5);
  for (int64_t gr = 0; gr < b.grid_rows(); ++gr) {
    for (int64_t gc = 0; gc < b.grid_cols(); ++gc) {
      CHECK(testing::bitwise_equal(b.get_block(gr, gc), direct.get_block(gr, gc)));
    }
  }
}

TEST_CASE("dropping a store releases its pool pages") {
  testing::TempDir tmp;
  BufferPool pool(1 << 20, tmp.path() / "spill");
  std::mt19937_64 rng(36);
  std::string id;
  {
    BlockStore store =
        store_from_dense(pool, fresh_relation_id("tmp"), testing::random_matrix(rng, 16, 16), 4, 4);
    id = store.id();
    CHECK(pool.contains({id, 0, 0}));
  }
  CHECK_FALSE(pool.contains({id, 0, 0}));
}

TEST_CASE("fresh relation ids never collide") {
  std::string a = fresh_relation_id("x");
  std::string b = fresh_relation_id("x");
  CHECK(a != b);
  CHECK(a.rfind("x", 0) == 0);
}
