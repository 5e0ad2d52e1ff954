// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

// Reference implementations the engine is tested against. These are written
// for clarity, not speed, and deliberately share no code with src/.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "inferdb/model.hpp"
#include "inferdb/relation.hpp"
#include "inferdb/tensor.hpp"

namespace testing {

/// Plain i-j-k triple loop, accumulation order independent of the engine's.
inline inferdb::DenseTensor naive_matmul(const inferdb::DenseTensor& a,
                                         const inferdb::DenseTensor& b) {
  int64_t m = a.rows(), k = a.cols(), n = b.cols();
  inferdb::DenseTensor c = inferdb::DenseTensor::matrix(m, n);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += a.at2(i, p) * b.at2(p, j);
      c.at2(i, j) = acc;
    }
  }
  return c;
}

/// Valid convolution, stride 1, channels-last image, kernels outC x kh x kw x C.
inline inferdb::DenseTensor naive_conv(const inferdb::DenseTensor& image,
                                       const inferdb::DenseTensor& kernels,
                                       const inferdb::DenseTensor& bias) {
  int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  int64_t oc = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2);
  inferdb::DenseTensor out({h - kh + 1, w - kw + 1, oc});
  for (int64_t y = 0; y + kh <= h; ++y) {
    for (int64_t x = 0; x + kw <= w; ++x) {
      for (int64_t o = 0; o < oc; ++o) {
        double acc = bias.at(o);
        for (int64_t dy = 0; dy < kh; ++dy) {
          for (int64_t dx = 0; dx < kw; ++dx) {
            for (int64_t ch = 0; ch < c; ++ch) {
              acc += image.at3(y + dy, x + dx, ch) * kernels.at4(o, dy, dx, ch);
            }
          }
        }
        out.at3(y, x, o) = acc;
      }
    }
  }
  return out;
}

/// Nested-loop join returning (left index, right index) matches in the
/// engine's canonical order: key ascending, then left index, then right.
inline std::vector<std::pair<int64_t, int64_t>> naive_join_matches(
    const inferdb::RowRelation& left, const inferdb::RowRelation& right,
    const std::vector<int>& lkey, const std::vector<int>& rkey) {
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int64_t i = 0; i < left.row_count(); ++i) {
    for (int64_t j = 0; j < right.row_count(); ++j) {
      bool match = true;
      for (size_t t = 0; t < lkey.size(); ++t) {
        const inferdb::Value& a = left.rows[static_cast<size_t>(i)][static_cast<size_t>(lkey[t])];
        const inferdb::Value& b = right.rows[static_cast<size_t>(j)][static_cast<size_t>(rkey[t])];
        if (a.cmp(b) != 0) match = false;
      }
      if (match) out.emplace_back(i, j);
    }
  }
  std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
    for (size_t t = 0; t < lkey.size(); ++t) {
      const inferdb::Value& a =
          left.rows[static_cast<size_t>(x.first)][static_cast<size_t>(lkey[t])];
      const inferdb::Value& b =
          left.rows[static_cast<size_t>(y.first)][static_cast<size_t>(lkey[t])];
      int c = a.cmp(b);
      if (c != 0) return c < 0;
    }
    return x < y;
  });
  return out;
}

/// Scalar forward pass that mirrors the engine's accumulation order
/// (ascending-k dots, bias add, activation formulas), for bitwise label
/// comparisons.
inline std::vector<double> scalar_pipeline(const std::vector<double>& feat,
                                           const inferdb::Model& m) {
  std::vector<double> cur = feat;
  for (const inferdb::Layer& layer : m.layers) {
    int64_t in = static_cast<int64_t>(cur.size());
    int64_t out = layer.units;
    std::vector<double> next(static_cast<size_t>(out));
    for (int64_t u = 0; u < out; ++u) {
      double acc = 0.0;
      const double* w = layer.weights.raw() + u * in;
      for (int64_t k = 0; k < in; ++k) acc += cur[static_cast<size_t>(k)] * w[k];
      next[static_cast<size_t>(u)] = acc + layer.bias.at(u);
    }
    switch (layer.activation) {
      case inferdb::Activation::Identity: break;
      case inferdb::Activation::Relu:
        for (double& x : next) x = x > 0.0 ? x : 0.0;
        break;
      case inferdb::Activation::Sigmoid:
        for (double& x : next) x = 1.0 / (1.0 + std::exp(-x));
        break;
      case inferdb::Activation::Softmax: {
        double mx = next[0];
        for (double x : next) mx = std::max(mx, x);
        double sum = 0.0;
        for (double& x : next) {
          x = std::exp(x - mx);
          sum += x;
        }
        for (double& x : next) x /= sum;
        break;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

inline double max_rel_err(const inferdb::DenseTensor& got, const inferdb::DenseTensor& want) {
  if (got.size() != want.size()) return 1e300;
  double max_diff = 0.0, max_ref = 0.0;
  for (int64_t i = 0; i < got.size(); ++i) {
    max_diff = std::max(max_diff, std::fabs(got.raw()[i] - want.raw()[i]));
    max_ref = std::max(max_ref, std::fabs(want.raw()[i]));
  }
  return max_diff / std::max(1.0, max_ref);
}

inline bool bitwise_equal(const inferdb::DenseTensor& a, const inferdb::DenseTensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.raw(), b.raw(), static_cast<size_t>(a.size()) * 8) == 0;
}

inline inferdb::DenseTensor random_matrix(std::mt19937_64& rng, int64_t rows, int64_t cols,
                                          double scale = 1.0) {
  inferdb::DenseTensor t = inferdb::DenseTensor::matrix(rows, cols);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& x : t.data()) x = dist(rng);
  return t;
}

inline inferdb::DenseTensor random_tensor(std::mt19937_64& rng, std::vector<int64_t> shape,
                                          double scale = 1.0) {
  inferdb::DenseTensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& x : t.data()) x = dist(rng);
  return t;
}

/// Unique scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("inferdb_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string sub(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Weight-bound dense model with seeded values.
inline inferdb::Model make_dense_model(
    const std::string& name, int64_t input_dim,
    const std::vector<std::pair<int64_t, inferdb::Activation>>& layers, std::mt19937_64& rng) {
  inferdb::Model m;
  m.name = name;
  m.input = inferdb::FlowShape::flat(input_dim);
  int64_t in = input_dim;
  for (const auto& [units, act] : layers) {
    inferdb::Layer l;
    l.kind = inferdb::LayerKind::Dense;
    l.units = units;
    l.activation = act;
    l.weights = random_matrix(rng, units, in, 1.0 / std::sqrt(static_cast<double>(in)));
    l.bias = random_tensor(rng, {units}, 0.1);
    m.layers.push_back(std::move(l));
    in = units;
  }
  m.weights_loaded = true;
  return m;
}

}  // namespace testing
