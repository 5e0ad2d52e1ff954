// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/cache.hpp"

#include <cmath>
#include <cstring>

#include "inferdb/errors.hpp"

namespace inferdb {

std::string_view to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::Off: return "off";
    case CacheMode::Exact: return "exact";
    case CacheMode::Approx: return "approx";
  }
  return "unknown";
}

void CacheConfig::validate() const {
  if (tau < 0.0) raise(ErrorKind::InvalidArgument, "cache tau must be nonnegative");
  if (capacity < 1) raise(ErrorKind::InvalidArgument, "cache capacity must be at least 1");
  if (quant_decimals < 0 || quant_decimals > 15) {
    raise(ErrorKind::InvalidArgument, "cache quantization decimals must be in [0, 15]");
  }
}

InferenceCache::InferenceCache(CacheConfig config) : config_(config) { config_.validate(); }

void InferenceCache::check_dim(const std::vector<double>& features) const {
  if (dim_ >= 0 && static_cast<int64_t>(features.size()) != dim_) {
    raise(ErrorKind::InvalidArgument, "cache expects " + std::to_string(dim_) +
                                          "-dimensional features, got " +
                                          std::to_string(features.size()));
  }
  if (features.empty()) raise(ErrorKind::InvalidArgument, "cache features must be nonempty");
}

std::string InferenceCache::quantized_key(const std::vector<double>& features) const {
  double scale = std::pow(10.0, config_.quant_decimals);
  std::string key(features.size() * sizeof(int64_t), '\0');
  for (size_t i = 0; i < features.size(); ++i) {
    int64_t q = static_cast<int64_t>(std::llround(features[i] * scale));
    std::memcpy(key.data() + i * sizeof(int64_t), &q, sizeof(int64_t));
  }
  return key;
}

void InferenceCache::put(const std::vector<double>& features, DenseTensor prediction) {
  check_dim(features);
  std::lock_guard lock(mutex_);
  if (dim_ < 0) dim_ = static_cast<int64_t>(features.size());
  Entry entry;
  entry.features = features;
  entry.prediction = std::move(prediction);
  entry.counter = next_counter_++;
  entry.exact_key = quantized_key(features);
  exact_index_[entry.exact_key] = entry.counter;
  entries_.push_back(std::move(entry));
  ++stats_.insertions;
  while (static_cast<int64_t>(entries_.size()) > config_.capacity) {
    const Entry& oldest = entries_.front();
    auto it = exact_index_.find(oldest.exact_key);
    if (it != exact_index_.end() && it->second == oldest.counter) exact_index_.erase(it);
    entries_.pop_front();
    ++stats_.evictions;
  }
}

std::optional<DenseTensor> InferenceCache::lookup(const std::vector<double>& features) {
  check_dim(features);
  std::lock_guard lock(mutex_);
  if (config_.mode == CacheMode::Off || entries_.empty()) {
    ++stats_.misses;
    return std::nullopt;
  }
  if (config_.mode == CacheMode::Exact) {
    auto it = exact_index_.find(quantized_key(features));
    if (it == exact_index_.end()) {
      ++stats_.misses;
      return std::nullopt;
    }
    uint64_t base = entries_.front().counter;
    ++stats_.hits;
    return entries_[it->second - base].prediction;
  }
  // Approx: brute-force nearest neighbor, oldest entry wins distance ties.
  const Entry* best = nullptr;
  double best_dist2 = 0.0;
  for (const Entry& entry : entries_) {
    double d2 = 0.0;
    for (size_t i = 0; i < features.size(); ++i) {
      double diff = features[i] - entry.features[i];
      d2 += diff * diff;
    }
    if (best == nullptr || d2 < best_dist2) {
      best = &entry;
      best_dist2 = d2;
    }
  }
  if (best != nullptr && best_dist2 <= config_.tau * config_.tau) {
    ++stats_.hits;
    return best->prediction;
  }
  ++stats_.misses;
  return std::nullopt;
}

int64_t InferenceCache::dim() const {
  std::lock_guard lock(mutex_);
  return dim_;
}

int64_t InferenceCache::size() const {
  std::lock_guard lock(mutex_);
  return static_cast<int64_t>(entries_.size());
}

CacheStats InferenceCache::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

void InferenceCache::reset_stats() {
  std::lock_guard lock(mutex_);
  stats_ = CacheStats{};
}

int prediction_label(const DenseTensor& prediction) {
  if (prediction.size() == 0) raise(ErrorKind::InvalidArgument, "empty prediction vector");
  if (prediction.size() == 1) return prediction.at(0) >= 0.5 ? 1 : 0;
  int best = 0;
  for (int64_t i = 1; i < prediction.size(); ++i) {
    if (prediction.at(i) > prediction.at(best)) best = static_cast<int>(i);
  }
  return best;
}

ErrorEstimate estimate_cache_error(
    InferenceCache& cache,
    const std::function<DenseTensor(const std::vector<double>&)>& full_inference,
    const std::function<std::vector<double>(std::mt19937_64&)>& sample_query, int64_t n,
    uint64_t seed) {
  if (n < 30) {
    raise(ErrorKind::InvalidArgument,
          "estimate_cache_error needs n >= 30, got " + std::to_string(n));
  }
  std::mt19937_64 rng(seed);
  int64_t mismatches = 0;
  for (int64_t i = 0; i < n; ++i) {
    std::vector<double> query = sample_query(rng);
    DenseTensor truth = full_inference(query);
    std::optional<DenseTensor> cached = cache.lookup(query);
    // A miss falls through to full inference, so only a hit can disagree.
    if (cached && prediction_label(*cached) != prediction_label(truth)) ++mismatches;
  }
  ErrorEstimate est;
  est.samples = n;
  est.error_rate = static_cast<double>(mismatches) / static_cast<double>(n);
  double half = 1.96 * std::sqrt(est.error_rate * (1.0 - est.error_rate) / static_cast<double>(n));
  est.ci_low = est.error_rate - half;
  est.ci_high = est.error_rate + half;
  return est;
}

}  // namespace inferdb
