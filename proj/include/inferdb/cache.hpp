// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "inferdb/tensor.hpp"

namespace inferdb {

enum class CacheMode { Off, Exact, Approx };

std::string_view to_string(CacheMode mode);

struct CacheConfig {
  CacheMode mode = CacheMode::Off;
  double tau = 0.0;         // approx-mode L2 radius
  int quant_decimals = 6;   // exact-mode key quantization
  int64_t capacity = 65536;  // max entries, FIFO eviction

  void validate() const;
};

struct CacheStats {
  int64_t hits = 0;
  int64_t misses = 0;
  int64_t insertions = 0;
  int64_t evictions = 0;
  double hit_rate() const {
    int64_t total = hits + misses;
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
  }
};

/// Feature-keyed store of prediction results. Exact mode hits on equality of
/// the decimal-quantized feature key; approx mode scans for the nearest entry
/// by L2 distance and hits within tau, ties broken by the lowest insertion
/// counter. Lookups on a miss fall through to full inference at the caller.
class InferenceCache {
 public:
  explicit InferenceCache(CacheConfig config);

  /// Stores features -> prediction, evicting the oldest entry past capacity.
  void put(const std::vector<double>& features, DenseTensor prediction);

  std::optional<DenseTensor> lookup(const std::vector<double>& features);

  int64_t dim() const;
  int64_t size() const;
  CacheStats stats() const;
  const CacheConfig& config() const { return config_; }
  void reset_stats();

 private:
  struct Entry {
    std::vector<double> features;
    DenseTensor prediction;
    uint64_t counter = 0;
    std::string exact_key;
  };

  std::string quantized_key(const std::vector<double>& features) const;
  void check_dim(const std::vector<double>& features) const;

  CacheConfig config_;
  mutable std::mutex mutex_;
  std::deque<Entry> entries_;  // FIFO order, front is oldest
  std::unordered_map<std::string, uint64_t> exact_index_;  // key -> newest counter
  uint64_t next_counter_ = 0;
  int64_t dim_ = -1;
  CacheStats stats_;
};

/// Coerces a prediction vector to a class label: argmax for multi-output
/// models (lowest index wins ties), 0.5-thresholded for a single sigmoid
/// output.
int prediction_label(const DenseTensor& prediction);

struct ErrorEstimate {
  double error_rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int64_t samples = 0;
};

/// Monte-Carlo estimate of the answer-change rate introduced by the cache:
/// draws n queries from the sampler, answers each through the cache path
/// (misses fall through to full inference and therefore count as agreement),
/// and compares class labels against full inference. The 95% interval uses
/// the normal approximation p +/- 1.96*sqrt(p(1-p)/n).
ErrorEstimate estimate_cache_error(
    InferenceCache& cache,
    const std::function<DenseTensor(const std::vector<double>&)>& full_inference,
    const std::function<std::vector<double>(std::mt19937_64&)>& sample_query, int64_t n,
    uint64_t seed);

}  // namespace inferdb
