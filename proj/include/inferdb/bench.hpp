// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "inferdb/engine.hpp"

namespace inferdb {

/// Structured benchmark output. `lines` hold everything reproducible for a
/// fixed seed (case parameters, correctness verdicts, counters); `timings`
/// hold wall-clock measurements and ratios derived from them. The digest in
/// deterministic_text() covers the deterministic lines only, so reports diff
/// clean across runs and worker counts.
struct BenchReport {
  std::string suite;
  std::vector<std::string> lines;
  std::vector<std::string> timings;
  bool passed = true;

  std::string deterministic_text() const;
  std::string full_text() const;
};

/// Valid suite names: matmul, conv, optimizer, pushdown, oom, cache, e2e.
std::vector<std::string> bench_suite_names();

/// Runs one suite with the given engine configuration. `scratch_dir` receives
/// generated datasets, model manifests, and per-engine spill directories.
BenchReport run_bench_suite(const std::string& suite, const EngineConfig& config,
                            const std::string& scratch_dir);

uint64_t fnv1a64(std::string_view s);

}  // namespace inferdb
