/*
 * Copyright 2026 The survmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "survmamba/fusion.hpp"

namespace survmamba {

///////////////////////////////////////////
// Attention baselines
///////////////////////////////////////////

// Single-head scaled dot-product attention projections, each [D x D].
struct AttentionParams {
  RowMatrix<double> wq;
  RowMatrix<double> wk;
  RowMatrix<double> wv;

  static AttentionParams random(Index d_model, Rng& rng);
  Index d_model() const { return wq.rows(); }
  std::size_t param_bytes() const { return std::size_t(3 * wq.size()) * 4; }
};

// softmax(Q K^T / sqrt(D)) V with row-max subtraction, evaluated over
// blocks of `block` query rows so that only block x L scores are live.
// block <= 0 materializes the full score matrix.
RowMatrix<double> attend(const RowMatrix<double>& q, const RowMatrix<double>& k,
                         const RowMatrix<double>& v, Index block = 0);

// Self-attention over x: [L x D] -> [L x D].
Tensor self_attention(const AttentionParams& p, const Tensor& x, Index block = 0);

// Fixed queries over L tokens: [Q x D], [L x D] -> [Q x D].
Tensor co_attention(const AttentionParams& p, const Tensor& queries, const Tensor& tokens,
                    Index block = 0);

///////////////////////////////////////////
// Scaling harness
///////////////////////////////////////////

struct BenchConfig {
  // Fused sequence lengths; each modality contributes L/2 tokens.
  std::vector<Index> lengths = {1000, 5000, 10000, 20000, 50000};
  Index optional_length = 100000;
  bool include_optional = false;
  Index hist_dim = 512;
  Index prot_dim = 50;
  Index d_model = 32;
  Index n_local = 2;
  Index n_global = 1;
  Index queries = 50;
  Index repetitions = 5;
  Index warmup = 2;
  Index block = 256;
  double memory_limit_mb = 3072;
  std::uint64_t seed = 7;
};

void validate(const BenchConfig& cfg);

struct BenchRow {
  std::string method;
  Index length = 0;
  double median_ms = 0;
  double p25_ms = 0;
  double p75_ms = 0;
  std::size_t param_bytes = 0;
  bool ok = true;
  std::string note;  // why a point was skipped
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::map<std::string, double> slopes;  // log-log least squares over the main grid
  std::vector<std::string> warnings;
  std::size_t default_trunk_bytes = 0;   // trunk at its default width, for reference
};

inline const std::vector<std::string> kBenchMethods = {"fusion_trunk", "self_attention", "co_attention"};

BenchReport run_scaling(const BenchConfig& cfg, std::ostream* progress = nullptr);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Linear-interpolated quantile of unsorted samples, q in [0, 1].
double quantile(std::vector<double> samples, double q);

void write_bench_csv(const std::filesystem::path& path, const BenchReport& report);
std::string bench_summary(const BenchReport& report);

}  // namespace survmamba
