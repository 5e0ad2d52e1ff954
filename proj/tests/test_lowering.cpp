// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <vector>

#include "doctest.h"
#include "inferdb/lowering.hpp"
#include "oracles.hpp"

using namespace inferdb;

TEST_CASE("join-aggregate matmul agrees with a naive triple loop") {
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    int64_t m = 1 + static_cast<int64_t>(rng() % 40);
    int64_t k = 1 + static_cast<int64_t>(rng() % 40);
    int64_t n = 1 + static_cast<int64_t>(rng() % 40);
    int64_t br = 1 + static_cast<int64_t>(rng() % 8);
    int64_t bk = 1 + static_cast<int64_t>(rng() % 8);
    int64_t bn = 1 + static_cast<int64_t>(rng() % 8);
    DenseTensor a = testing::random_matrix(rng, m, k);
    DenseTensor b = testing::random_matrix(rng, k, n);
    BlockStore sa = store_from_dense(pool, fresh_relation_id("a"), a, br, bk);
    BlockStore sb = store_from_dense(pool, fresh_relation_id("b"), b, bk, bn);
    BlockStore sc = matmul_as_join_agg(sa, sb, fresh_relation_id("c"), 1 + trial % 4);
    DenseTensor want = testing::naive_matmul(a, b);
    CHECK(testing::max_rel_err(dense_from_store(sc), want) <= 1e-9);
  }
}

TEST_CASE("single inner block makes the lowering bitwise identical to dense") {
  // One block along k means each output tile is a single dense product with
  // the same accumulation order as dense_matmul, so no rounding slack at all.
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(42);
  DenseTensor a = testing::random_matrix(rng, 30, 17);
  DenseTensor b = testing::random_matrix(rng, 17, 24);
  BlockStore sa = store_from_dense(pool, fresh_relation_id("a"), a, 8, 17);
  BlockStore sb = store_from_dense(pool, fresh_relation_id("b"), b, 17, 6);
  BlockStore sc = matmul_as_join_agg(sa, sb, fresh_relation_id("c"));
  CHECK(testing::bitwise_equal(dense_from_store(sc), dense_matmul(a, b)));
}

TEST_CASE("matmul lowering rejects mismatched inner grids") {
  testing::TempDir tmp;
  BufferPool pool(1 << 20, tmp.path() / "spill");
  std::mt19937_64 rng(43);
  DenseTensor a = testing::random_matrix(rng, 8, 12);
  DenseTensor b = testing::random_matrix(rng, 12, 8);
  BlockStore sa = store_from_dense(pool, fresh_relation_id("a"), a, 4, 3);
  BlockStore sb = store_from_dense(pool, fresh_relation_id("b"), b, 4, 4);
  CHECK_THROWS_AS(matmul_as_join_agg(sa, sb, fresh_relation_id("c")), EngineError);
}

TEST_CASE("blocked matmul overload matches the store overload") {
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(44);
  DenseTensor a = testing::random_matrix(rng, 19, 23);
  DenseTensor b = testing::random_matrix(rng, 23, 11);
  BlockedMatrix ba = block_partition(a, 5, 7);
  BlockedMatrix bb = block_partition(b, 7, 4);
  DenseTensor via_blocked = reassemble(matmul_as_join_agg(ba, bb, pool));
  BlockStore sa = store_from_dense(pool, fresh_relation_id("a"), a, 5, 7);
  BlockStore sb = store_from_dense(pool, fresh_relation_id("b"), b, 7, 4);
  DenseTensor via_store = dense_from_store(matmul_as_join_agg(sa, sb, fresh_relation_id("c")));
  CHECK(testing::bitwise_equal(via_blocked, via_store));
}

TEST_CASE("add as join pairs tiles by grid position") {
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(45);
  DenseTensor a = testing::random_matrix(rng, 13, 9);
  DenseTensor b = testing::random_matrix(rng, 13, 9);
  BlockStore sa = store_from_dense(pool, fresh_relation_id("a"), a, 4, 4);
  BlockStore sb = store_from_dense(pool, fresh_relation_id("b"), b, 4, 4);
  BlockStore sc = add_as_join(sa, sb, fresh_relation_id("c"), 2);
  CHECK(testing::bitwise_equal(dense_from_store(sc), dense_add(a, b)));
  BlockStore misaligned = store_from_dense(pool, fresh_relation_id("d"), b, 5, 4);
  CHECK_THROWS_AS(add_as_join(sa, misaligned, fresh_relation_id("e")), EngineError);
}

TEST_CASE("bias broadcast slices the vector per tile column") {
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(46);
  DenseTensor m = testing::random_matrix(rng, 10, 14);
  DenseTensor bias = testing::random_matrix(rng, 1, 14);
  bias = reshape(std::move(bias), {14});
  BlockStore sm = store_from_dense(pool, fresh_relation_id("m"), m, 3, 5);
  BlockStore sum = add_bias_as_map(sm, bias, fresh_relation_id("s"), 2);
  DenseTensor got = dense_from_store(sum);
  for (int64_t i = 0; i < 10; ++i) {
    for (int64_t j = 0; j < 14; ++j) {
      CHECK(got.at2(i, j) == m.at2(i, j) + bias.at(j));
    }
  }
  DenseTensor short_bias({3}, std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(add_bias_as_map(sm, short_bias, fresh_relation_id("t")), EngineError);
}

TEST_CASE("activation map covers elementwise kinds and guards softmax tiling") {
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(47);
  DenseTensor m = testing::random_matrix(rng, 9, 12);
  BlockStore sm = store_from_dense(pool, fresh_relation_id("m"), m, 4, 12);
  for (Activation kind : {Activation::Relu, Activation::Sigmoid, Activation::Identity}) {
    BlockStore out = activation_as_map(sm, kind, fresh_relation_id("o"), 2);
    CHECK(testing::bitwise_equal(dense_from_store(out), apply_activation(m, kind)));
  }
  BlockStore whole_rows = activation_as_map(sm, Activation::Softmax, fresh_relation_id("sm"));
  CHECK(testing::bitwise_equal(dense_from_store(whole_rows),
                               apply_activation(m, Activation::Softmax)));
  BlockStore split = store_from_dense(pool, fresh_relation_id("sp"), m, 4, 5);
  CHECK_THROWS_AS(activation_as_map(split, Activation::Softmax, fresh_relation_id("x")),
                  EngineError);
}

TEST_CASE("lowered convolution matches the direct oracle in both reprs") {
  testing::TempDir tmp;
  BufferPool pool(1 << 22, tmp.path() / "spill");
  std::mt19937_64 rng(48);
  for (int trial = 0; trial < 12; ++trial) {
    int64_t c = 1 + static_cast<int64_t>(rng() % 3);
    int64_t kh = 1 + static_cast<int64_t>(rng() % 3);
    int64_t kw = 1 + static_cast<int64_t>(rng() % 3);
    int64_t h = kh + static_cast<int64_t>(rng() % 8);
    int64_t w = kw + static_cast<int64_t>(rng() % 8);
    int64_t oc = 1 + static_cast<int64_t>(rng() % 6);
    DenseTensor image = testing::random_tensor(rng, {h, w, c});
    DenseTensor kernels = testing::random_tensor(rng, {oc, kh, kw, c});
    DenseTensor bias = testing::random_tensor(rng, {oc});
    DenseTensor want = testing::naive_conv(image, kernels, bias);
    DenseTensor udf = conv2d_lowered(image, kernels, bias, Repr::Udf, pool, 7, 7, 2);
    DenseTensor rel = conv2d_lowered(image, kernels, bias, Repr::Relation, pool, 7, 7, 2);
    REQUIRE(udf.shape() == want.shape());
    REQUIRE(rel.shape() == want.shape());
    CHECK(testing::max_rel_err(udf, want) <= 1e-9);
    CHECK(testing::max_rel_err(rel, want) <= 1e-9);
  }
}

TEST_CASE("embedding lookup gathers and reduces identically in both reprs") {
  std::mt19937_64 rng(49);
  DenseTensor table = testing::random_matrix(rng, 20, 6);
  std::vector<int64_t> ids = {3, 0, 19, 3, 7};
  DenseTensor udf = embedding_lookup(table, ids, Repr::Udf, EmbedReduce::None);
  DenseTensor rel = embedding_lookup(table, ids, Repr::Relation, EmbedReduce::None);
  REQUIRE(udf.rows() == 5);
  REQUIRE(udf.cols() == 6);
  CHECK(testing::bitwise_equal(udf, rel));
  for (size_t i = 0; i < ids.size(); ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      CHECK(udf.at2(static_cast<int64_t>(i), j) == table.at2(ids[i], j));
    }
  }

  DenseTensor sum_udf = embedding_lookup(table, ids, Repr::Udf, EmbedReduce::Sum);
  DenseTensor sum_rel = embedding_lookup(table, ids, Repr::Relation, EmbedReduce::Sum);
  REQUIRE(sum_udf.rows() == 1);
  CHECK(testing::bitwise_equal(sum_udf, sum_rel));
  for (int64_t j = 0; j < 6; ++j) {
    double acc = 0.0;
    for (int64_t id : ids) acc += table.at2(id, j);
    CHECK(sum_udf.at2(0, j) == doctest::Approx(acc).epsilon(1e-12));
  }

  std::vector<int64_t> bad = {20};
  CHECK_THROWS_AS(embedding_lookup(table, bad, Repr::Udf, EmbedReduce::None), EngineError);
  std::vector<int64_t> negative = {-1};
  CHECK_THROWS_AS(embedding_lookup(table, negative, Repr::Relation, EmbedReduce::None),
                  EngineError);

  BlockedMatrix blocked = block_partition(table, 7, 6);
  DenseTensor via_blocked = embedding_lookup(blocked, ids, Repr::Relation, EmbedReduce::None);
  CHECK(testing::bitwise_equal(via_blocked, udf));
}
