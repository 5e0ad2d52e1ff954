// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "inferdb/block_store.hpp"
#include "inferdb/lowering.hpp"
#include "inferdb/parser.hpp"

namespace inferdb {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// All randomness below goes through u01 so the draws depend only on the raw
// engine stream, not on a library's distribution algorithm.
double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double urand(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * u01(rng); }

int64_t irand(std::mt19937_64& rng, int64_t lo, int64_t hi) {
  int64_t span = hi - lo + 1;
  int64_t v = lo + static_cast<int64_t>(u01(rng) * static_cast<double>(span));
  return std::min(v, hi);
}

std::string fd(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

DenseTensor random_matrix(std::mt19937_64& rng, int64_t rows, int64_t cols, double scale) {
  DenseTensor t = DenseTensor::matrix(rows, cols);
  for (double& x : t.data()) x = urand(rng, -scale, scale);
  return t;
}

DenseTensor random_tensor(std::mt19937_64& rng, std::vector<int64_t> shape, double scale) {
  DenseTensor t(std::move(shape));
  for (double& x : t.data()) x = urand(rng, -scale, scale);
  return t;
}

/// max |a-b| / max(1, max |b|)
double rel_err(const DenseTensor& a, const DenseTensor& b) {
  if (a.size() != b.size()) return 1e300;
  double max_diff = 0.0;
  double max_ref = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    max_diff = std::max(max_diff, std::fabs(a.raw()[i] - b.raw()[i]));
    max_ref = std::max(max_ref, std::fabs(b.raw()[i]));
  }
  return max_diff / std::max(1.0, max_ref);
}

/// Cumulative Zipf(s) table over `n` ranks.
std::vector<double> zipf_cdf(int64_t n, double s) {
  std::vector<double> cdf(static_cast<size_t>(n));
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    sum += 1.0 / std::pow(static_cast<double>(i + 1), s);
    cdf[static_cast<size_t>(i)] = sum;
  }
  for (double& x : cdf) x /= sum;
  return cdf;
}

int64_t zipf_draw(std::mt19937_64& rng, const std::vector<double>& cdf) {
  double u = u01(rng);
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return static_cast<int64_t>(cdf.size()) - 1;
  return static_cast<int64_t>(it - cdf.begin());
}

Model dense_model(const std::string& name, int64_t input_dim,
                  const std::vector<std::pair<int64_t, Activation>>& layers, std::mt19937_64* rng) {
  Model m;
  m.name = name;
  m.input.spatial = false;
  m.input.width = input_dim;
  int64_t in = input_dim;
  for (const auto& [units, act] : layers) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.units = units;
    l.activation = act;
    if (rng != nullptr) {
      double scale = 1.0 / std::sqrt(static_cast<double>(in));
      l.weights = random_matrix(*rng, units, in, scale);
      l.bias = random_matrix(*rng, 1, units, 0.1);
      l.bias = reshape(std::move(l.bias), {units});
    }
    m.layers.push_back(std::move(l));
    in = units;
  }
  m.weights_loaded = rng != nullptr;
  validate_model(m, 1);
  return m;
}

/// Scalar forward pass mirroring the engine's accumulation order exactly:
/// ascending-k dot products, bias add, then the activation formulas used by
/// apply_activation.
std::vector<double> scalar_forward(const std::vector<double>& feat, const Model& m) {
  std::vector<double> cur = feat;
  for (const Layer& layer : m.layers) {
    int64_t in = static_cast<int64_t>(cur.size());
    int64_t out = layer.units;
    std::vector<double> next(static_cast<size_t>(out));
    for (int64_t u = 0; u < out; ++u) {
      double acc = 0.0;
      const double* w = layer.weights.raw() + u * in;
      for (int64_t k = 0; k < in; ++k) acc += cur[static_cast<size_t>(k)] * w[k];
      next[static_cast<size_t>(u)] = acc + layer.bias.raw()[u];
    }
    switch (layer.activation) {
      case Activation::Identity: break;
      case Activation::Relu:
        for (double& x : next) x = x > 0.0 ? x : 0.0;
        break;
      case Activation::Sigmoid:
        for (double& x : next) x = 1.0 / (1.0 + std::exp(-x));
        break;
      case Activation::Softmax: {
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

int scalar_label(const std::vector<double>& outputs) {
  if (outputs.size() == 1) return outputs[0] >= 0.5 ? 1 : 0;
  size_t best = 0;
  for (size_t j = 1; j < outputs.size(); ++j) {
    if (outputs[j] > outputs[best]) best = j;
  }
  return static_cast<int>(best);
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  for (size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out << ",";
    out << header[i];
  }
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ",";
      out << row[i];
    }
    out << "\n";
  }
  if (!out) raise(ErrorKind::IoError, "cannot write " + path.string());
}

EngineConfig sub_config(const EngineConfig& base, const std::string& scratch,
                        const std::string& label) {
  EngineConfig cfg = base;
  cfg.data_dir.clear();
  cfg.spill_dir = (fs::path(scratch) / label / "spill").string();
  return cfg;
}

uint64_t digest_doubles(const double* p, int64_t n) {
  uint64_t h = 1469598103934665603ull;
  for (int64_t i = 0; i < n; ++i) {
    uint64_t bits;
    std::memcpy(&bits, p + i, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h = (h ^ ((bits >> (8 * b)) & 0xff)) * 1099511628211ull;
    }
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[15 - i] = digits[(v >> (4 * i)) & 0xf];
  }
  buf[16] = '\0';
  return std::string(buf);
}

void check(BenchReport& report, const std::string& line, bool ok) {
  report.lines.push_back(line + (ok ? " verdict=pass" : " verdict=fail"));
  if (!ok) report.passed = false;
}

// ---------------------------------------------------------------------------
// matmul: randomized blocked join+aggregate products against the dense kernel.

BenchReport bench_matmul(const EngineConfig& cfg, const std::string& scratch) {
  BenchReport report;
  report.suite = "matmul";
  std::mt19937_64 rng(cfg.seed * 1000003 + 1);
  BufferPool pool(int64_t{256} << 20, fs::path(scratch) / "matmul" / "spill");
  auto start = Clock::now();
  for (int c = 0; c < 200; ++c) {
    // Dimension caps scale with block granularity so the tiny-block cases
    // stay at a sane block count.
    int64_t cap;
    int64_t br, bc, bn;
    switch (c % 4) {
      case 0:
        br = bc = bn = 1;
        cap = 24;
        break;
      case 1:
        br = bc = bn = 7;
        cap = 100;
        break;
      case 2:
        br = bc = bn = 64;
        cap = 300;
        break;
      default:
        br = irand(rng, 5, 37);
        bc = irand(rng, 5, 41);
        bn = irand(rng, 5, 29);
        cap = 300;
        break;
    }
    int64_t m = irand(rng, 1, cap);
    int64_t k = irand(rng, 1, cap);
    int64_t n = irand(rng, 1, cap);
    DenseTensor a = random_matrix(rng, m, k, 1.0);
    DenseTensor b = random_matrix(rng, k, n, 1.0);
    BlockStore sa = store_from_dense(pool, fresh_relation_id("bench_a"), a, br, bc);
    BlockStore sb = store_from_dense(pool, fresh_relation_id("bench_b"), b, bc, bn);
    BlockStore sc = matmul_as_join_agg(sa, sb, fresh_relation_id("bench_c"), cfg.workers);
    DenseTensor got = dense_from_store(sc);
    DenseTensor want = dense_matmul(a, b);
    double err = rel_err(got, want);
    check(report,
          "case=" + std::to_string(c) + " m=" + std::to_string(m) + " k=" + std::to_string(k) +
              " n=" + std::to_string(n) + " br=" + std::to_string(br) + " bc=" +
              std::to_string(bc) + " bn=" + std::to_string(bn) + " err=" + fd(err),
          err <= 1e-9);
  }
  report.timings.push_back("total_ms=" + fd(ms_since(start)));
  return report;
}

// ---------------------------------------------------------------------------
// conv: both representations against a direct sliding-window reference.

DenseTensor direct_conv(const DenseTensor& image, const DenseTensor& kernels,
                        const DenseTensor& bias) {
  int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  int64_t oc = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2);
  DenseTensor out({h - kh + 1, w - kw + 1, oc});
  for (int64_t y = 0; y + kh <= h; ++y) {
    for (int64_t x = 0; x + kw <= w; ++x) {
      for (int64_t o = 0; o < oc; ++o) {
        double acc = 0.0;
        for (int64_t dy = 0; dy < kh; ++dy) {
          for (int64_t dx = 0; dx < kw; ++dx) {
            for (int64_t ch = 0; ch < c; ++ch) {
              acc += image.at3(y + dy, x + dx, ch) * kernels.at4(o, dy, dx, ch);
            }
          }
        }
        out.at3(y, x, o) = acc + bias.raw()[o];
      }
    }
  }
  return out;
}

BenchReport bench_conv(const EngineConfig& cfg, const std::string& scratch) {
  BenchReport report;
  report.suite = "conv";
  std::mt19937_64 rng(cfg.seed * 1000003 + 2);
  BufferPool pool(int64_t{64} << 20, fs::path(scratch) / "conv" / "spill");
  auto start = Clock::now();
  for (int i = 0; i < 100; ++i) {
    int64_t kh = irand(rng, 1, 3);
    int64_t kw = irand(rng, 1, 3);
    int64_t h = irand(rng, kh, 16);
    int64_t w = irand(rng, kw, 16);
    int64_t c = irand(rng, 1, 4);
    int64_t oc = irand(rng, 1, 8);
    DenseTensor image = random_tensor(rng, {h, w, c}, 1.0);
    DenseTensor kernels = random_tensor(rng, {oc, kh, kw, c}, 1.0);
    DenseTensor bias = random_tensor(rng, {oc}, 0.5);
    int64_t br = irand(rng, 1, 8);
    int64_t bc = irand(rng, 1, 8);
    DenseTensor udf = conv2d_lowered(image, kernels, bias, Repr::Udf, pool, br, bc, cfg.workers);
    DenseTensor rel =
        conv2d_lowered(image, kernels, bias, Repr::Relation, pool, br, bc, cfg.workers);
    DenseTensor want = direct_conv(image, kernels, bias);
    double err_udf = rel_err(udf, want);
    double err_rel = rel_err(rel, want);
    check(report,
          "case=" + std::to_string(i) + " h=" + std::to_string(h) + " w=" + std::to_string(w) +
              " c=" + std::to_string(c) + " kh=" + std::to_string(kh) + " kw=" +
              std::to_string(kw) + " oc=" + std::to_string(oc) + " err_udf=" + fd(err_udf) +
              " err_rel=" + fd(err_rel),
          err_udf <= 1e-9 && err_rel <= 1e-9);
  }
  report.timings.push_back("total_ms=" + fd(ms_since(start)));
  return report;
}

// ---------------------------------------------------------------------------
// optimizer: representation choices for reference model shapes plus threshold
// monotonicity and extreme-threshold properties on random plans.

int plan_with_model(Plan& plan, const Model& m, int64_t batch) {
  PlanNode input;
  input.kind = PlanKind::Project;
  input.out_kind = ValueKind::Matrix;
  input.out_rows = batch;
  input.out_cols = m.input.elements();
  int input_id = plan.add(std::move(input));
  int tail = append_model_chain(plan, input_id, m, 0);
  plan.outputs = {tail};
  return tail;
}

BenchReport bench_optimizer(const EngineConfig& cfg, const std::string&) {
  BenchReport report;
  report.suite = "optimizer";
  std::mt19937_64 rng(cfg.seed * 1000003 + 3);
  const int64_t threshold = int64_t{2} * 1024 * 1024 * 1024;

  struct Ref {
    std::string name;
    int64_t input;
    std::vector<std::pair<int64_t, Activation>> layers;
    int64_t batch;
  };
  std::vector<Ref> refs = {
      {"amazon14k_fc", 597540, {{1024, Activation::Relu}, {14588, Activation::Sigmoid}}, 8000},
      {"fraud_fc256", 28, {{256, Activation::Relu}, {2, Activation::Softmax}}, 1000},
      {"encoder_fc", 76, {{3072, Activation::Relu}, {768, Activation::Identity}}, 1000},
  };
  OptimizerConfig oc;
  oc.memory_threshold_bytes = threshold;
  for (const Ref& ref : refs) {
    Model m = dense_model(ref.name, ref.input, ref.layers, nullptr);
    Plan plan;
    plan_with_model(plan, m, ref.batch);
    size_t original = plan.nodes.size();
    select_representation(plan, oc);
    bool any_rel = false, any_udf = false;
    int matmul_index = 0;
    for (size_t i = 0; i < original; ++i) {
      const PlanNode& node = plan.nodes[i];
      if (!is_linalg(node.kind)) continue;
      int64_t est = estimate_memory(plan, node);
      report.lines.push_back("model=" + ref.name + " node=" + std::to_string(node.id) +
                             " kind=" + std::string(to_string(node.kind)) + " layer=" +
                             std::to_string(node.layer) + " est=" + std::to_string(est) +
                             " repr=" + std::string(to_string(node.repr)));
      if (node.repr == Repr::Relation) any_rel = true;
      if (node.repr == Repr::Udf) any_udf = true;
      if (node.kind == PlanKind::MatMul) {
        int64_t weight_bytes = node.weight_rows * node.weight_cols * 8;
        if (ref.name == "amazon14k_fc" && matmul_index == 0) {
          check(report, "amazon14k_fc layer1 weight_bytes=" + std::to_string(weight_bytes),
                weight_bytes == int64_t{4895047680});
          check(report, "amazon14k_fc layer1 repr=" + std::string(to_string(node.repr)),
                node.repr == Repr::Relation);
        }
        ++matmul_index;
      }
    }
    if (ref.name == "amazon14k_fc") {
      check(report, "amazon14k_fc hybrid", any_rel && any_udf);
    } else {
      check(report, ref.name + " all_udf", any_udf && !any_rel);
    }
  }

  for (int p = 0; p < 50; ++p) {
    int64_t batch = irand(rng, 1, 5000);
    int64_t in = irand(rng, 1, 2000);
    int layers = static_cast<int>(irand(rng, 1, 4));
    std::vector<std::pair<int64_t, Activation>> spec;
    for (int l = 0; l < layers; ++l) {
      spec.push_back({irand(rng, 1, 2000),
                      l + 1 == layers ? Activation::Softmax : Activation::Relu});
    }
    Model m = dense_model("rand" + std::to_string(p), in, spec, nullptr);
    Plan base;
    plan_with_model(base, m, batch);
    size_t original = base.nodes.size();

    int64_t max_est = 0;
    for (const PlanNode& node : base.nodes) {
      if (is_linalg(node.kind)) max_est = std::max(max_est, estimate_memory(base, node));
    }
    int64_t t1 = irand(rng, 0, 2 * max_est);
    int64_t t2 = irand(rng, 0, 2 * max_est);
    if (t1 > t2) std::swap(t1, t2);

    auto reprs_at = [&](int64_t t) {
      Plan copy = base;
      OptimizerConfig c2;
      c2.memory_threshold_bytes = t;
      select_representation(copy, c2);
      std::vector<Repr> out;
      for (size_t i = 0; i < original; ++i) {
        if (is_linalg(copy.nodes[i].kind)) out.push_back(copy.nodes[i].repr);
      }
      return out;
    };
    std::vector<Repr> low = reprs_at(t1);
    std::vector<Repr> high = reprs_at(t2);
    std::vector<Repr> zero = reprs_at(0);
    std::vector<Repr> inf = reprs_at(std::numeric_limits<int64_t>::max());
    bool monotone = true;
    for (size_t i = 0; i < low.size(); ++i) {
      if (high[i] == Repr::Relation && low[i] != Repr::Relation) monotone = false;
    }
    bool all_rel = std::all_of(zero.begin(), zero.end(),
                               [](Repr r) { return r == Repr::Relation; });
    bool all_udf = std::all_of(inf.begin(), inf.end(), [](Repr r) { return r == Repr::Udf; });
    check(report,
          "plan=" + std::to_string(p) + " nodes=" + std::to_string(low.size()) + " t1=" +
              std::to_string(t1) + " t2=" + std::to_string(t2) + " monotone extreme0 extremeinf",
          monotone && all_rel && all_udf);
  }
  return report;
}

// ---------------------------------------------------------------------------
// pushdown: split-feature rewrite against the materializing-join baseline.

BenchReport bench_pushdown(const EngineConfig& cfg, const std::string& scratch) {
  BenchReport report;
  report.suite = "pushdown";
  std::mt19937_64 rng(cfg.seed * 1000003 + 4);
  const int64_t n = 50000;
  const int64_t f = 484;
  const int64_t h = 256;

  Catalog catalog;
  auto build_side = [&](const std::string& table, const std::string& prefix) {
    TableEntry entry;
    entry.schema.columns.push_back({"id", ColumnType::Int});
    for (int64_t j = 0; j < f; ++j) {
      entry.schema.columns.push_back({prefix + std::to_string(j), ColumnType::Float});
    }
    entry.key_columns = {0};
    entry.feature_columns = feature_columns_of(entry.schema, entry.key_columns);
    std::vector<int64_t> ids(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
    for (int64_t i = n - 1; i > 0; --i) {
      std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(irand(rng, 0, i))]);
    }
    entry.data.schema = entry.schema;
    entry.data.key_columns = entry.key_columns;
    entry.data.rows.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      Row row;
      row.reserve(static_cast<size_t>(f) + 1);
      row.push_back(Value(ids[static_cast<size_t>(i)]));
      for (int64_t j = 0; j < f; ++j) row.push_back(Value(urand(rng, -1.0, 1.0)));
      entry.data.rows.push_back(std::move(row));
    }
    catalog.register_table(table, std::move(entry));
  };
  build_side("d1", "a");
  build_side("d2", "b");

  Model m = dense_model("joined_fc", 2 * f, {{h, Activation::Sigmoid}}, &rng);
  catalog.register_model(m);

  QueryAst ast = parse_query("SELECT joined_fc.predict(*) FROM d1, d2 WHERE d1.id = d2.id");

  auto run_one = [&](bool pushdown, const std::string& label, double* out_ms) {
    OptimizerConfig oc;
    oc.memory_threshold_bytes = cfg.memory_threshold_bytes;
    oc.pushdown_enabled = pushdown;
    Plan ir = build_ir(ast, catalog);
    ExecutablePlan ex = lower_plan(optimize(std::move(ir), oc), oc);
    int matmuls = 0;
    for (const PlanNode& node : ex.plan.nodes) {
      if (node.kind == PlanKind::MatMul) ++matmuls;
      for (const PlanNode& fx : node.fused) {
        if (fx.kind == PlanKind::MatMul) ++matmuls;
      }
    }
    BufferPool pool(cfg.buffer_pool_bytes, fs::path(scratch) / "pushdown" / label);
    ExecContext ctx;
    ctx.catalog = &catalog;
    ctx.pool = &pool;
    ctx.workers = cfg.workers;
    ctx.block_rows = cfg.block_rows;
    ctx.block_cols = cfg.block_cols;
    auto t0 = Clock::now();
    RuntimeValue v = execute_plan(ex, ctx);
    *out_ms = ms_since(t0);
    report.lines.push_back("config=" + label + " matmul_nodes=" + std::to_string(matmuls));
    return v;
  };

  double base_ms = 0.0, push_ms = 0.0;
  RuntimeValue baseline = run_one(false, "baseline", &base_ms);
  RuntimeValue rewritten = run_one(true, "rewritten", &push_ms);

  const KeyedMatrix& mb = std::get<KeyedMatrix>(baseline);
  const KeyedMatrix& mr = std::get<KeyedMatrix>(rewritten);
  bool keys_match = mb.keys.size() == mr.keys.size();
  double max_err = 0.0;
  if (keys_match) {
    for (size_t i = 0; i < mb.keys.size() && keys_match; ++i) {
      keys_match = mb.keys[i].size() == 1 && mr.keys[i].size() == 1 &&
                   mb.keys[i][0].cmp(mr.keys[i][0]) == 0;
    }
    if (keys_match && mb.data.size() == mr.data.size()) {
      max_err = rel_err(mr.data, mb.data);
    } else {
      keys_match = false;
    }
  }
  check(report, "rows=" + std::to_string(mb.data.rows()) + " keys_aligned", keys_match);
  check(report, "per_key_err=" + fd(max_err), keys_match && max_err <= 1e-9);
  double speedup = push_ms > 0.0 ? base_ms / push_ms : 0.0;
  report.timings.push_back("baseline_ms=" + fd(base_ms));
  report.timings.push_back("rewritten_ms=" + fd(push_ms));
  report.timings.push_back("speedup=" + fd(speedup));
  report.timings.push_back(speedup > 1.0 ? "speedup>1 verdict=pass" : "speedup>1 verdict=fail");
  return report;
}

// ---------------------------------------------------------------------------
// oom: out-of-core blocked product under a tight pool budget, and the same
// product as one dense operation under a hard allocation cap.

BenchReport bench_oom(const EngineConfig& cfg, const std::string& scratch) {
  BenchReport report;
  report.suite = "oom";
  std::mt19937_64 rng(cfg.seed * 1000003 + 5);
  const int64_t n = 4096;
  const int64_t budget = int64_t{64} << 20;
  DenseTensor a = random_matrix(rng, n, n, 1.0);
  DenseTensor b = random_matrix(rng, n, n, 1.0);

  BufferPool pool(budget, fs::path(scratch) / "oom" / "spill");
  auto t0 = Clock::now();
  BlockStore sa = store_from_dense(pool, "oom_a", a, 1024, 1024);
  BlockStore sb = store_from_dense(pool, "oom_b", b, 1024, 1024);
  BlockStore sc = matmul_as_join_agg(sa, sb, "oom_c", cfg.workers);
  double blocked_ms = ms_since(t0);

  auto t1 = Clock::now();
  DenseTensor want = dense_matmul(a, b);
  double oracle_ms = ms_since(t1);

  double max_err = 0.0;
  double max_ref = 0.0;
  for (int64_t i = 0; i < n; ++i) max_ref = std::max(max_ref, 1.0);
  for (int64_t bi = 0; bi < sc.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < sc.grid_cols(); ++bj) {
      DenseTensor got = sc.get_block(bi, bj);
      for (int64_t r = 0; r < got.rows(); ++r) {
        for (int64_t c2 = 0; c2 < got.cols(); ++c2) {
          double ref = want.at2(bi * 1024 + r, bj * 1024 + c2);
          max_err = std::max(max_err, std::fabs(got.at2(r, c2) - ref));
          max_ref = std::max(max_ref, std::fabs(ref));
        }
      }
    }
  }
  double err = max_err / std::max(1.0, max_ref);
  BufferPoolStats stats = pool.stats();
  check(report, "blocked completion", true);
  check(report, "peak_within_budget", stats.peak_resident_bytes <= budget);
  check(report, "spilled", stats.spills > 0);
  check(report, "err=" + fd(err), err <= 1e-9);

  bool capacity_error = false;
  try {
    ScopedAllocationCap cap(budget);
    DenseTensor dense_once = dense_matmul(a, b);
    (void)dense_once;
  } catch (const EngineError& e) {
    capacity_error = e.kind() == ErrorKind::CapacityExceeded;
  }
  check(report, "udf capacity-error", capacity_error);
  report.timings.push_back("blocked_ms=" + fd(blocked_ms));
  report.timings.push_back("oracle_ms=" + fd(oracle_ms));
  return report;
}

// ---------------------------------------------------------------------------
// cache: exact-mode transparency, tau monotonicity, speedup, and the
// Monte-Carlo error estimate with a planted mismatch rate.

struct CacheWorkload {
  std::vector<std::vector<double>> rows;  // feature rows in query order
  int64_t dim = 0;
};

CacheWorkload clustered_workload(std::mt19937_64& rng, int64_t queries, int64_t centers,
                                 int64_t dim, bool jitter) {
  CacheWorkload w;
  w.dim = dim;
  std::vector<std::vector<double>> cs(static_cast<size_t>(centers));
  for (auto& c : cs) {
    c.resize(static_cast<size_t>(dim));
    for (double& x : c) x = urand(rng, 0.0, 10.0);
  }
  std::vector<double> cdf = zipf_cdf(centers, 1.2);
  w.rows.reserve(static_cast<size_t>(queries));
  for (int64_t q = 0; q < queries; ++q) {
    int64_t c = zipf_draw(rng, cdf);
    std::vector<double> row = cs[static_cast<size_t>(c)];
    if (jitter) {
      std::vector<double> d(static_cast<size_t>(dim));
      double norm = 0.0;
      for (double& x : d) {
        x = urand(rng, -1.0, 1.0);
        norm += x * x;
      }
      norm = std::sqrt(std::max(norm, 1e-300));
      double radius = urand(rng, 0.0, 0.4);
      for (int64_t j = 0; j < dim; ++j) row[static_cast<size_t>(j)] += d[static_cast<size_t>(j)] / norm * radius;
    }
    w.rows.push_back(std::move(row));
  }
  return w;
}

BenchReport bench_cache(const EngineConfig& cfg, const std::string& scratch) {
  BenchReport report;
  report.suite = "cache";
  std::mt19937_64 rng(cfg.seed * 1000003 + 6);
  const int64_t dim = 64;
  const int64_t queries = 20000;

  Model m = dense_model(
      "twoclass", dim,
      {{512, Activation::Relu}, {512, Activation::Relu}, {2, Activation::Softmax}}, &rng);
  fs::path model_dir = fs::path(scratch) / "cache" / "model";
  save_model(m, model_dir.string());

  CacheWorkload dup = clustered_workload(rng, queries, 400, dim, /*jitter=*/false);
  CacheWorkload jit = clustered_workload(rng, queries, 400, dim, /*jitter=*/true);
  auto workload_csv = [&](const CacheWorkload& w, const std::string& name) {
    std::vector<std::string> header;
    for (int64_t j = 0; j < w.dim; ++j) header.push_back("f" + std::to_string(j));
    std::vector<std::vector<std::string>> rows;
    rows.reserve(w.rows.size());
    for (const auto& r : w.rows) {
      std::vector<std::string> cells;
      cells.reserve(r.size());
      for (double v : r) cells.push_back(fd(v));
      rows.push_back(std::move(cells));
    }
    fs::path p = fs::path(scratch) / "cache" / name;
    fs::create_directories(p.parent_path());
    write_csv(p, header, rows);
    return p.string();
  };
  std::string dup_csv = workload_csv(dup, "dup.csv");
  std::string jit_csv = workload_csv(jit, "jit.csv");

  auto run_mode = [&](const std::string& label, const std::string& csv, CacheMode mode, double tau,
                      double* out_ms) {
    EngineConfig ec = sub_config(cfg, scratch, "cache_" + label);
    ec.cache.mode = mode;
    ec.cache.tau = tau;
    Engine engine(ec);
    engine.ingest("q", csv, {});
    engine.load_model("twoclass", (model_dir / "twoclass.manifest.json").string());
    auto t0 = Clock::now();
    QueryResult r = engine.run_query("SELECT twoclass.predict(*) FROM q");
    *out_ms = ms_since(t0);
    return r;
  };

  double off_ms = 0.0, exact_ms = 0.0;
  QueryResult off = run_mode("off", dup_csv, CacheMode::Off, 0.0, &off_ms);
  QueryResult exact = run_mode("exact", dup_csv, CacheMode::Exact, 0.0, &exact_ms);

  auto pred_digest = [](const QueryResult& r) {
    std::vector<double> flat;
    for (const Row& row : r.rows.rows) {
      for (const Value& v : row) flat.push_back(v.as_float());
    }
    return digest_doubles(flat.data(), static_cast<int64_t>(flat.size()));
  };
  uint64_t off_digest = pred_digest(off);
  uint64_t exact_digest = pred_digest(exact);
  check(report, "exact_bitwise off=" + hex64(off_digest) + " exact=" + hex64(exact_digest),
        off_digest == exact_digest && off.rows.rows.size() == exact.rows.rows.size());
  double exact_rate = exact.report.cache.hit_rate();
  check(report, "exact_hit_rate=" + fd(exact_rate), exact_rate > 0.0);

  std::vector<double> taus = {0.0, 0.1, 0.5, 1.0};
  std::vector<double> rates;
  double approx_ms_tau1 = 0.0;
  for (double tau : taus) {
    double ms = 0.0;
    QueryResult r = run_mode("approx_" + fd(tau), jit_csv, CacheMode::Approx, tau, &ms);
    rates.push_back(r.report.cache.hit_rate());
    if (tau == 1.0) approx_ms_tau1 = ms;
    report.timings.push_back("approx_tau=" + fd(tau) + " ms=" + fd(ms));
  }
  bool monotone = true;
  for (size_t i = 1; i < rates.size(); ++i) {
    if (rates[i] + 1e-12 < rates[i - 1]) monotone = false;
  }
  {
    std::string line = "approx_hit_rates";
    for (size_t i = 0; i < taus.size(); ++i) {
      line += " tau" + fd(taus[i]) + "=" + fd(rates[i]);
    }
    check(report, line, monotone);
  }
  double jit_off_ms = 0.0;
  QueryResult jit_off = run_mode("jit_off", jit_csv, CacheMode::Off, 0.0, &jit_off_ms);
  (void)jit_off;
  double approx_speedup = approx_ms_tau1 > 0.0 ? jit_off_ms / approx_ms_tau1 : 0.0;
  report.timings.push_back("off_ms=" + fd(jit_off_ms));
  report.timings.push_back("approx_speedup=" + fd(approx_speedup));
  report.timings.push_back(approx_speedup > 1.0 ? "approx_speedup>1 verdict=pass"
                                                : "approx_speedup>1 verdict=fail");
  report.timings.push_back("exact_ms=" + fd(exact_ms) + " off_dup_ms=" + fd(off_ms));

  // Planted-rate Monte-Carlo estimate: a pool of vectors whose cached
  // predictions disagree with full inference on exactly 5%.
  const int64_t pool_size = 1000;
  const int64_t poisoned = 50;
  int contained = 0;
  const int trials = 100;
  std::vector<std::vector<double>> pool_vecs(static_cast<size_t>(pool_size));
  std::mt19937_64 pool_rng(cfg.seed * 7919 + 11);
  for (int64_t i = 0; i < pool_size; ++i) {
    auto& v = pool_vecs[static_cast<size_t>(i)];
    v.resize(4);
    for (double& x : v) x = urand(pool_rng, -1.0, 1.0);
  }
  auto truth = [](const std::vector<double>& v) {
    return v[0] + v[1] > 0.0 ? 1 : 0;
  };
  auto full_inference = [&](const std::vector<double>& v) {
    DenseTensor out({2});
    int label = truth(v);
    out.raw()[0] = label == 0 ? 0.9 : 0.1;
    out.raw()[1] = label == 0 ? 0.1 : 0.9;
    return out;
  };
  for (int t = 0; t < trials; ++t) {
    CacheConfig cc;
    cc.mode = CacheMode::Exact;
    cc.capacity = pool_size;
    InferenceCache cache(cc);
    for (int64_t i = 0; i < pool_size; ++i) {
      const auto& v = pool_vecs[static_cast<size_t>(i)];
      int label = truth(v);
      if (i < poisoned) label = 1 - label;
      DenseTensor out({2});
      out.raw()[0] = label == 0 ? 0.9 : 0.1;
      out.raw()[1] = label == 0 ? 0.1 : 0.9;
      cache.put(v, std::move(out));
    }
    auto sampler = [&](std::mt19937_64& r) {
      return pool_vecs[static_cast<size_t>(irand(r, 0, pool_size - 1))];
    };
    ErrorEstimate est =
        estimate_cache_error(cache, full_inference, sampler, 4000, cfg.seed + 1000 + t);
    if (est.ci_low <= 0.05 && 0.05 <= est.ci_high) ++contained;
  }
  check(report, "planted_rate_ci contained=" + std::to_string(contained) + "/100",
        contained >= 90);
  return report;
}

// ---------------------------------------------------------------------------
// e2e: grouped count over a predicate on model predictions, against an
// offline scalar pipeline, across representation forcings.

BenchReport bench_e2e(const EngineConfig& cfg, const std::string& scratch) {
  BenchReport report;
  report.suite = "e2e";
  std::mt19937_64 rng(cfg.seed * 1000003 + 7);
  const int64_t rows = 10000;
  const int64_t dim = 64;
  const int64_t days = 7;
  const int64_t distinct = 3000;

  Model m = dense_model("daily", dim, {{128, Activation::Relu}, {2, Activation::Softmax}}, &rng);
  fs::path model_dir = fs::path(scratch) / "e2e" / "model";
  save_model(m, model_dir.string());

  std::vector<std::vector<double>> pool_vecs(static_cast<size_t>(distinct));
  for (auto& v : pool_vecs) {
    v.resize(static_cast<size_t>(dim));
    for (double& x : v) x = urand(rng, -2.0, 2.0);
  }
  std::vector<std::string> header = {"id", "day"};
  for (int64_t j = 0; j < dim; ++j) header.push_back("f" + std::to_string(j));
  std::vector<std::vector<std::string>> csv_rows;
  std::vector<int64_t> oracle_counts(static_cast<size_t>(days), 0);
  std::vector<int64_t> day_totals(static_cast<size_t>(days), 0);
  for (int64_t i = 0; i < rows; ++i) {
    int64_t day = irand(rng, 0, days - 1);
    const std::vector<double>& feat = pool_vecs[static_cast<size_t>(irand(rng, 0, distinct - 1))];
    std::vector<std::string> cells = {std::to_string(i), std::to_string(day)};
    for (double v : feat) cells.push_back(fd(v));
    csv_rows.push_back(std::move(cells));
    ++day_totals[static_cast<size_t>(day)];
    if (scalar_label(scalar_forward(feat, m)) == 1) {
      ++oracle_counts[static_cast<size_t>(day)];
    }
  }
  fs::path csv_path = fs::path(scratch) / "e2e" / "daily.csv";
  fs::create_directories(csv_path.parent_path());
  write_csv(csv_path, header, csv_rows);

  struct Config {
    std::string label;
    int64_t threshold;
    CacheMode cache;
  };
  std::vector<Config> configs = {
      {"udf", std::numeric_limits<int64_t>::max(), CacheMode::Off},
      {"relation", 0, CacheMode::Off},
      {"hybrid", 12 * 1024 * 1024, CacheMode::Off},
      {"hybrid_cache", 12 * 1024 * 1024, CacheMode::Exact},
  };
  for (const Config& c : configs) {
    EngineConfig ec = sub_config(cfg, scratch, "e2e_" + c.label);
    ec.memory_threshold_bytes = c.threshold;
    ec.cache.mode = c.cache;
    Engine engine(ec);
    CsvOptions opts;
    opts.key_columns = {"id"};
    engine.ingest("t", csv_path.string(), opts);
    engine.load_model("daily", (model_dir / "daily.manifest.json").string());
    auto t0 = Clock::now();
    QueryResult r = engine.run_query(
        "SELECT count(*) FROM t WHERE daily.predict(*) = True GROUP BY day");
    report.timings.push_back("config=" + c.label + " ms=" + fd(ms_since(t0)));
    std::vector<int64_t> got(static_cast<size_t>(days), 0);
    for (const Row& row : r.rows.rows) {
      int64_t day = row[0].as_int();
      got[static_cast<size_t>(day)] = row[1].as_int();
    }
    bool all_equal = true;
    for (int64_t d = 0; d < days; ++d) {
      bool same = got[static_cast<size_t>(d)] == oracle_counts[static_cast<size_t>(d)];
      if (!same) all_equal = false;
      report.lines.push_back("config=" + c.label + " day=" + std::to_string(d) + " count=" +
                             std::to_string(got[static_cast<size_t>(d)]) + " oracle=" +
                             std::to_string(oracle_counts[static_cast<size_t>(d)]));
    }
    check(report, "config=" + c.label + " counts_equal", all_equal);
    if (c.label == "hybrid" || c.label == "hybrid_cache") {
      bool any_rel = false, any_udf = false;
      for (const NodeReport& node : r.report.nodes) {
        if (node.repr == "RELATION") any_rel = true;
        if (node.repr == "UDF") any_udf = true;
      }
      check(report, "config=" + c.label + " mixed_representations", any_rel && any_udf);
    }
    if (c.cache == CacheMode::Exact) {
      check(report, "config=" + c.label + " cache_hits=" + std::to_string(r.report.cache.hits),
            r.report.cache.hits > 0);
    }
  }
  return report;
}

}  // namespace

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

std::string BenchReport::deterministic_text() const {
  std::ostringstream os;
  os << "suite=" << suite << "\n";
  for (const std::string& line : lines) os << line << "\n";
  os << "passed=" << (passed ? "true" : "false") << "\n";
  std::string body = os.str();
  return body + "digest=" + hex64(fnv1a64(body)) + "\n";
}

std::string BenchReport::full_text() const {
  std::string out = deterministic_text();
  for (const std::string& line : timings) {
    out += "timing " + line + "\n";
  }
  return out;
}

std::vector<std::string> bench_suite_names() {
  return {"matmul", "conv", "optimizer", "pushdown", "oom", "cache", "e2e"};
}

BenchReport run_bench_suite(const std::string& suite, const EngineConfig& config,
                            const std::string& scratch_dir) {
  fs::create_directories(scratch_dir);
  if (suite == "matmul") return bench_matmul(config, scratch_dir);
  if (suite == "conv") return bench_conv(config, scratch_dir);
  if (suite == "optimizer") return bench_optimizer(config, scratch_dir);
  if (suite == "pushdown") return bench_pushdown(config, scratch_dir);
  if (suite == "oom") return bench_oom(config, scratch_dir);
  if (suite == "cache") return bench_cache(config, scratch_dir);
  if (suite == "e2e") return bench_e2e(config, scratch_dir);
  raise(ErrorKind::InvalidArgument, "unknown bench suite: " + suite);
}

}  // namespace inferdb
