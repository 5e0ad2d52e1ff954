// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Each criterion prints exactly one PASS/FAIL line; the
// process exits nonzero when any criterion fails. Criterion 8 reruns every
// workload with the same seed and with worker counts {1, 4} and compares the
// deterministic report texts bitwise.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "inferdb/bench.hpp"
#include "inferdb/executor.hpp"
#include "inferdb/lowering.hpp"
#include "inferdb/optimizer.hpp"
#include "inferdb/parser.hpp"

namespace fs = std::filesystem;
using namespace inferdb;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int64_t irand(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  int64_t span = hi - lo + 1;
  return std::min(lo + static_cast<int64_t>(u01(rng) * static_cast<double>(span)), hi);
}

std::string hex64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void check(BenchReport& report, const std::string& line, bool ok) {
  report.lines.push_back(line + (ok ? " verdict=pass" : " verdict=fail"));
  if (!ok) report.passed = false;
}

uint64_t digest_rows(const RowRelation& rel) {
  std::string text;
  for (const Row& row : rel.rows) {
    for (const Value& v : row) {
      if (v.type() == ColumnType::Float) {
        double d = v.as_float();
        uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        text += hex64(bits);
      } else {
        text += v.to_text();
      }
      text += ',';
    }
    text += ';';
  }
  return fnv1a64(text);
}

bool rows_bitwise_equal(const RowRelation& a, const RowRelation& b) {
  if (a.row_count() != b.row_count() || a.schema.arity() != b.schema.arity()) return false;
  for (int64_t r = 0; r < a.row_count(); ++r) {
    for (int c = 0; c < a.schema.arity(); ++c) {
      if (a.rows[static_cast<size_t>(r)][static_cast<size_t>(c)].cmp(
              b.rows[static_cast<size_t>(r)][static_cast<size_t>(c)]) != 0) {
        return false;
      }
    }
  }
  return true;
}

// Fused and unfused lowerings of the same annotated plan must agree bitwise.
// 50 random feed-forward instances; thresholds are drawn so most plans mix
// UDF and RELATION nodes, with all-UDF and all-RELATION extremes sprinkled in.
BenchReport fusion_report(uint64_t seed, int workers, const std::string& scratch) {
  BenchReport report;
  report.suite = "fusion";
  std::mt19937_64 rng(seed * 1000003 + 9);
  int mixed_plans = 0;

  for (int case_i = 0; case_i < 50; ++case_i) {
    int64_t batch = irand(rng, 1, 320);
    int64_t in_dim = irand(rng, 1, 48);
    int layer_count = static_cast<int>(irand(rng, 1, 4));

    Model m;
    m.name = "m";
    m.input.spatial = false;
    m.input.width = in_dim;
    int64_t in = in_dim;
    for (int l = 0; l < layer_count; ++l) {
      Layer layer;
      layer.kind = LayerKind::Dense;
      layer.units = irand(rng, 1, 96);
      layer.activation = static_cast<Activation>(irand(rng, 0, 3));
      double scale = 1.0 / std::sqrt(static_cast<double>(in));
      layer.weights = DenseTensor::matrix(layer.units, in);
      for (double& x : layer.weights.data()) x = (2.0 * u01(rng) - 1.0) * scale;
      layer.bias = DenseTensor({layer.units});
      for (double& x : layer.bias.data()) x = (2.0 * u01(rng) - 1.0) * 0.1;
      in = layer.units;
      m.layers.push_back(std::move(layer));
    }
    m.weights_loaded = true;

    Catalog catalog;
    catalog.register_model(m);
    TableEntry entry;
    entry.schema.columns.push_back({"id", ColumnType::Int});
    for (int64_t j = 0; j < in_dim; ++j) {
      entry.schema.columns.push_back({"f" + std::to_string(j), ColumnType::Float});
    }
    entry.key_columns = {0};
    for (int64_t j = 0; j < in_dim; ++j) entry.feature_columns.push_back(static_cast<int>(j + 1));
    entry.data.schema = entry.schema;
    entry.data.key_columns = entry.key_columns;
    for (int64_t r = 0; r < batch; ++r) {
      Row row;
      row.push_back(Value(r));
      for (int64_t j = 0; j < in_dim; ++j) row.push_back(Value(2.0 * u01(rng) - 1.0));
      entry.data.rows.push_back(std::move(row));
    }
    catalog.register_table("t", std::move(entry));

    OptimizerConfig oc;
    oc.block_rows = 64;
    oc.block_cols = 64;
    if (case_i % 5 == 0) {
      oc.memory_threshold_bytes = INT64_MAX;
    } else if (case_i % 7 == 0) {
      oc.memory_threshold_bytes = 0;
    } else {
      oc.memory_threshold_bytes = irand(rng, 0, 500000);
    }

    QueryAst ast = parse_query("SELECT m.predict(*) FROM t");
    Plan base = build_ir(ast, catalog);
    Plan unfused = base;
    select_representation(unfused, oc);
    Plan fused = base;
    select_representation(fused, oc);
    fuse_udf_subgraphs(fused, oc);

    int mapudf = 0, udf = 0, rel = 0;
    for (const PlanNode& node : fused.nodes) {
      if (node.kind == PlanKind::MapUDF) ++mapudf;
      if (node.repr == Repr::Udf) ++udf;
      if (node.repr == Repr::Relation) ++rel;
    }
    bool mixed = udf > 0 && rel > 0;
    if (mixed) ++mixed_plans;

    ExecutablePlan exu = lower_plan(std::move(unfused), oc);
    ExecutablePlan exf = lower_plan(std::move(fused), oc);
    BufferPool pool(int64_t{64} << 20,
                    fs::path(scratch) / "fusion" / ("case_" + std::to_string(case_i)));
    ExecContext ctx;
    ctx.catalog = &catalog;
    ctx.pool = &pool;
    ctx.workers = workers;
    ctx.block_rows = oc.block_rows;
    ctx.block_cols = oc.block_cols;
    RowRelation ru = result_relation(execute_plan(exu, ctx));
    RowRelation rf = result_relation(execute_plan(exf, ctx));

    check(report,
          "case=" + std::to_string(case_i) + " batch=" + std::to_string(batch) + " in=" +
              std::to_string(in_dim) + " layers=" + std::to_string(layer_count) + " threshold=" +
              std::to_string(oc.memory_threshold_bytes) + " mapudf=" + std::to_string(mapudf) +
              " udf=" + std::to_string(udf) + " rel=" + std::to_string(rel) +
              " digest=" + hex64(digest_rows(ru)),
          rows_bitwise_equal(ru, rf));
  }
  check(report, "mixed_plans=" + std::to_string(mixed_plans), mixed_plans >= 10);
  return report;
}

struct TripleRun {
  BenchReport canonical;  // workers 1, first run
  bool deterministic = false;
  double seconds = 0.0;  // canonical run only
};

TripleRun run_workload(const std::string& name, uint64_t seed, const std::string& scratch) {
  auto one = [&](int workers, const std::string& tag, double* secs) {
    std::string dir = scratch + "/" + name + "_" + tag;
    fs::create_directories(dir);
    auto t0 = Clock::now();
    BenchReport r = name == "fusion" ? fusion_report(seed, workers, dir) : [&] {
      EngineConfig cfg;
      cfg.seed = seed;
      cfg.workers = workers;
      return run_bench_suite(name, cfg, dir);
    }();
    if (secs != nullptr) *secs = seconds_since(t0);
    return r;
  };
  TripleRun out;
  out.canonical = one(1, "a", &out.seconds);
  BenchReport rerun = one(1, "b", nullptr);
  BenchReport threaded = one(4, "c", nullptr);
  std::string text = out.canonical.deterministic_text();
  out.deterministic =
      text == rerun.deterministic_text() && text == threaded.deterministic_text();
  return out;
}

bool timing_verdict(const BenchReport& report, const std::string& line) {
  return std::find(report.timings.begin(), report.timings.end(), line) != report.timings.end();
}

std::string fmt_secs(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", s);
  return buf;
}

int checks_passed(const BenchReport& r) {
  int n = 0;
  for (const std::string& line : r.lines) {
    if (line.size() >= 12 && line.compare(line.size() - 12, 12, " verdict=pass") == 0) ++n;
  }
  return n;
}

int checks_total(const BenchReport& r) {
  int n = 0;
  for (const std::string& line : r.lines) {
    if (line.find(" verdict=") != std::string::npos) ++n;
  }
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inferdb acceptance gate"};
  std::string scratch = (fs::temp_directory_path() / "inferdb_acceptance").string();
  std::string report_dir;
  uint64_t seed = 42;
  app.add_option("--scratch", scratch, "scratch directory for generated data");
  app.add_option("--report-dir", report_dir, "directory for full per-workload reports");
  app.add_option("--seed", seed, "master seed");
  CLI11_PARSE(app, argc, argv);

  std::error_code ec;
  fs::remove_all(scratch, ec);
  fs::create_directories(scratch);

  struct Line {
    int id;
    bool passed;
    std::string text;
  };
  std::vector<Line> lines;
  bool determinism = true;
  std::vector<std::string> nondeterministic;

  auto run = [&](const std::string& name) {
    TripleRun t = run_workload(name, seed, scratch);
    if (!t.deterministic) {
      determinism = false;
      nondeterministic.push_back(name);
    }
    if (!report_dir.empty()) {
      fs::create_directories(report_dir);
      std::ofstream out(fs::path(report_dir) / (name + ".txt"), std::ios::binary);
      out << t.canonical.full_text();
    }
    return t;
  };
  auto summary = [&](const TripleRun& t) {
    return std::to_string(checks_passed(t.canonical)) + "/" +
           std::to_string(checks_total(t.canonical)) + " checks";
  };

  {
    TripleRun mm = run("matmul");
    TripleRun cv = run("conv");
    double secs = mm.seconds + cv.seconds;
    bool ok = mm.canonical.passed && cv.canonical.passed && secs < 120.0;
    lines.push_back({1, ok,
                     "lowering oracle equivalence: matmul " + summary(mm) + ", conv " +
                         summary(cv) + ", " + fmt_secs(secs) + " s (bound 120)"});
  }
  {
    TripleRun t = run("optimizer");
    bool ok = t.canonical.passed && t.seconds < 60.0;
    lines.push_back({2, ok,
                     "optimizer rule fidelity: " + summary(t) + ", " + fmt_secs(t.seconds) +
                         " s (bound 60)"});
  }
  {
    TripleRun t = run("oom");
    bool ok = t.canonical.passed && t.seconds < 300.0;
    lines.push_back({3, ok,
                     "oom avoidance: " + summary(t) + ", " + fmt_secs(t.seconds) +
                         " s (bound 300)"});
  }
  {
    TripleRun t = run("pushdown");
    bool faster = timing_verdict(t.canonical, "speedup>1 verdict=pass");
    bool ok = t.canonical.passed && faster && t.seconds < 300.0;
    lines.push_back({4, ok,
                     "pushdown rewrite: " + summary(t) + ", speedup>1 " +
                         (faster ? "pass" : "fail") + ", " + fmt_secs(t.seconds) +
                         " s (bound 300)"});
  }
  {
    TripleRun t = run("fusion");
    bool ok = t.canonical.passed && t.seconds < 60.0;
    lines.push_back({5, ok,
                     "fusion soundness: " + summary(t) + ", " + fmt_secs(t.seconds) +
                         " s (bound 60)"});
  }
  {
    TripleRun t = run("cache");
    bool faster = timing_verdict(t.canonical, "approx_speedup>1 verdict=pass");
    bool ok = t.canonical.passed && faster && t.seconds < 300.0;
    lines.push_back({6, ok,
                     "cache properties: " + summary(t) + ", approx speedup>1 " +
                         (faster ? "pass" : "fail") + ", " + fmt_secs(t.seconds) +
                         " s (bound 300)"});
  }
  {
    TripleRun t = run("e2e");
    bool ok = t.canonical.passed && t.seconds < 120.0;
    lines.push_back({7, ok,
                     "end-to-end grouped counts: " + summary(t) + ", " + fmt_secs(t.seconds) +
                         " s (bound 120)"});
  }
  {
    std::string detail = "deterministic reports across reruns and workers {1, 4}";
    if (!determinism) {
      detail += "; mismatch in:";
      for (const std::string& n : nondeterministic) detail += " " + n;
    }
    lines.push_back({8, determinism, detail});
  }

  bool all = true;
  for (const Line& line : lines) {
    all = all && line.passed;
    std::printf("criterion %d %s: %s\n", line.id, line.passed ? "PASS" : "FAIL",
                line.text.c_str());
  }
  fs::remove_all(scratch, ec);
  return all ? 0 : 1;
}
