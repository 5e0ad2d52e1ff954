// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace inferdb {

/// Runs fn over [0, n) split into `workers` contiguous ranges, one thread per
/// range. Partitioning depends only on (n, workers), so any writer that keys
/// its output by item index is deterministic across worker counts.
inline void parallel_for(int64_t n, int workers,
                         const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  if (workers < 1) workers = 1;
  int64_t parts = std::min<int64_t>(workers, n);
  if (parts == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex error_mu;
  int64_t chunk = (n + parts - 1) / parts;
  for (int64_t p = 0; p < parts; ++p) {
    int64_t begin = p * chunk;
    int64_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace inferdb
