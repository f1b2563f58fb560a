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

#include "survmamba/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <new>
#include <ostream>
#include <sstream>

namespace survmamba {

namespace fs = std::filesystem;

///////////////////////////////////////////
// Attention baselines
///////////////////////////////////////////

AttentionParams AttentionParams::random(Index d_model, Rng& rng)
{
  const double bound = 1.0 / std::sqrt(double(d_model));
  AttentionParams p;
  p.wq = uniform_tensor({d_model, d_model}, bound, rng).matrix();
  p.wk = uniform_tensor({d_model, d_model}, bound, rng).matrix();
  p.wv = uniform_tensor({d_model, d_model}, bound, rng).matrix();
  return p;
}

RowMatrix<double> attend(const RowMatrix<double>& q, const RowMatrix<double>& k, const RowMatrix<double>& v,
                         Index block)
{
  if (q.cols() != k.cols() || k.rows() != v.rows())
    fail(ErrorKind::Dimension, "attend: incompatible Q, K, V shapes");
  if (k.rows() < 1) fail(ErrorKind::Domain, "attend: no tokens");
  const Index n_q = q.rows();
  const Index step = block <= 0 ? n_q : std::min(block, n_q);
  const double inv_sqrt_d = 1.0 / std::sqrt(double(q.cols()));
  RowMatrix<double> out(n_q, v.cols());
  RowMatrix<double> scores;
  try {
    scores.resize(step, k.rows());
  } catch (const std::bad_alloc&) {
    fail(ErrorKind::Resource, "attend: cannot allocate " + std::to_string(step) + " x " +
                                  std::to_string(k.rows()) + " scores; cap L or use query blocks");
  }
  for (Index r0 = 0; r0 < n_q; r0 += step) {
    const Index rows = std::min(step, n_q - r0);
    auto s = scores.topRows(rows);
    s.noalias() = q.middleRows(r0, rows) * k.transpose();
    s *= inv_sqrt_d;
    for (Index i = 0; i < rows; ++i) {
      auto row = s.row(i).array();
      row = (row - row.maxCoeff()).exp();
      row /= row.sum();
    }
    out.middleRows(r0, rows).noalias() = s * v;
  }
  return out;
}

Tensor self_attention(const AttentionParams& p, const Tensor& x, Index block)
{
  if (x.rank() != 2 || x.cols() != p.d_model())
    fail(ErrorKind::Dimension, "self_attention: input must be [L x " + std::to_string(p.d_model()) + "]");
  const auto xm = x.matrix();
  const RowMatrix<double> q = xm * p.wq;
  const RowMatrix<double> k = xm * p.wk;
  const RowMatrix<double> v = xm * p.wv;
  return Tensor::from_matrix(attend(q, k, v, block));
}

Tensor co_attention(const AttentionParams& p, const Tensor& queries, const Tensor& tokens, Index block)
{
  if (queries.rank() != 2 || tokens.rank() != 2 || queries.cols() != p.d_model() ||
      tokens.cols() != p.d_model())
    fail(ErrorKind::Dimension, "co_attention: inputs must have width " + std::to_string(p.d_model()));
  const RowMatrix<double> q = queries.matrix() * p.wq;
  const RowMatrix<double> k = tokens.matrix() * p.wk;
  const RowMatrix<double> v = tokens.matrix() * p.wv;
  return Tensor::from_matrix(attend(q, k, v, block));
}

///////////////////////////////////////////
// Statistics
///////////////////////////////////////////

double quantile(std::vector<double> samples, double q)
{
  if (samples.empty()) fail(ErrorKind::Domain, "quantile of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double pos = q * double(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  return samples[lo] + (pos - double(lo)) * (samples[hi] - samples[lo]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::Domain, "loglog_slope: need two or more points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) fail(ErrorKind::Domain, "loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) fail(ErrorKind::Domain, "loglog_slope: all x equal");
  return sxy / sxx;
}

///////////////////////////////////////////
// Harness
///////////////////////////////////////////

void validate(const BenchConfig& cfg)
{
  if (cfg.lengths.empty()) fail(ErrorKind::Config, "bench: no sequence lengths");
  for (std::size_t i = 0; i < cfg.lengths.size(); ++i) {
    if (cfg.lengths[i] < 2) fail(ErrorKind::Config, "bench: lengths must be at least 2");
    if (i > 0 && cfg.lengths[i] <= cfg.lengths[i - 1])
      fail(ErrorKind::Config, "bench: lengths must be strictly increasing");
  }
  if (cfg.include_optional && cfg.optional_length <= cfg.lengths.back())
    fail(ErrorKind::Config, "bench: optional length must exceed the main grid");
  if (cfg.repetitions < 3) fail(ErrorKind::Config, "bench: repetitions must be at least 3");
  if (cfg.warmup < 0) fail(ErrorKind::Config, "bench: warmup must be non-negative");
  if (cfg.d_model < 1 || cfg.hist_dim < 1 || cfg.prot_dim < 1 || cfg.queries < 1)
    fail(ErrorKind::Config, "bench: widths must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

// Smallest observable nonzero clock increment, in nanoseconds.
double timer_tick_ns()
{
  double best = 1e9;
  for (int i = 0; i < 200; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, double(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count()));
  }
  return std::max(best, 1.0);
}

Tensor random_rows(Index rows, Index cols, Rng& rng)
{
  return normal_tensor({rows, cols}, 1.0, rng);
}

double estimate_bytes(const std::string& method, Index length, const BenchConfig& cfg)
{
  const double l = double(length);
  const double d = double(cfg.d_model);
  if (method == "fusion_trunk") return 48.0 * l * d * 8.0;
  const double block = cfg.block <= 0 ? l : std::min<double>(double(cfg.block), l);
  if (method == "self_attention") return (block * l + 5.0 * l * d) * 8.0;
  return (double(std::min<Index>(cfg.queries, cfg.block <= 0 ? cfg.queries : cfg.block)) * l + 4.0 * l * d) * 8.0;
}

}  // namespace

BenchReport run_scaling(const BenchConfig& cfg, std::ostream* progress)
{
  validate(cfg);
  BenchReport report;
  Rng rng(cfg.seed);

  TrunkConfig tcfg;
  tcfg.d_model = cfg.d_model;
  tcfg.n_local = cfg.n_local;
  tcfg.n_global = cfg.n_global;
  const FusionTrunk trunk(tcfg, rng);
  ParamList trunk_params;
  trunk.collect(trunk_params, "trunk");
  const AttentionParams self_p = AttentionParams::random(cfg.d_model, rng);
  const AttentionParams co_p = AttentionParams::random(cfg.d_model, rng);
  const Mlp hist_proj(cfg.hist_dim, cfg.d_model, cfg.d_model, rng);
  const Mlp prot_proj(cfg.prot_dim, cfg.d_model, cfg.d_model, rng);
  {
    Rng ref_rng(cfg.seed);
    ParamList ref;
    FusionTrunk(TrunkConfig{}, ref_rng).collect(ref, "trunk");
    report.default_trunk_bytes = param_bytes(ref);
  }
  const std::map<std::string, std::size_t> bytes = {{"fusion_trunk", param_bytes(trunk_params)},
                                                    {"self_attention", self_p.param_bytes()},
                                                    {"co_attention", co_p.param_bytes()}};

  const double tick_ns = timer_tick_ns();
  std::vector<Index> lengths = cfg.lengths;
  if (cfg.include_optional) lengths.push_back(cfg.optional_length);

  NoGradScope no_grad;
  for (Index length : lengths) {
    // Patch-aligned modalities of L/2 tokens each; odd L drops one token.
    const Index half = length / 2;
    Var f_h, f_p;
    Tensor fused;
    try {
      f_h = hist_proj(constant(random_rows(half, cfg.hist_dim, rng)));
      f_p = prot_proj(constant(random_rows(half, cfg.prot_dim, rng)));
      fused = ordered_concat(f_h, f_p).value();
    } catch (const std::bad_alloc&) {
      for (const auto& m : kBenchMethods)
        report.rows.push_back({m, length, 0, 0, 0, bytes.at(m), false, "inputs do not fit in memory"});
      continue;
    }
    const Tensor queries = f_p.rows() >= cfg.queries ? slice_rows(f_p, 0, cfg.queries).value()
                                                     : random_rows(cfg.queries, cfg.d_model, rng);

    const std::map<std::string, std::function<void()>> runs = {
        {"fusion_trunk", [&] { (void)trunk(f_h, f_p); }},
        {"self_attention", [&] { (void)self_attention(self_p, fused, cfg.block); }},
        {"co_attention", [&] { (void)co_attention(co_p, queries, fused, cfg.block); }},
    };

    for (const auto& method : kBenchMethods) {
      BenchRow row{method, length, 0, 0, 0, bytes.at(method), true, ""};
      const double need_mb = estimate_bytes(method, length, cfg) / (1024.0 * 1024.0);
      if (need_mb > cfg.memory_limit_mb) {
        std::ostringstream os;
        os << "needs ~" << std::llround(need_mb) << " MB, limit " << std::llround(cfg.memory_limit_mb)
           << " MB; cap L or raise memory_limit_mb";
        row.ok = false;
        row.note = os.str();
        report.rows.push_back(row);
        if (progress) *progress << method << " L=" << length << " skipped: " << row.note << std::endl;
        continue;
      }
      try {
        const auto& run = runs.at(method);
        for (Index w = 0; w < cfg.warmup; ++w) run();
        std::vector<double> ms;
        for (Index r = 0; r < cfg.repetitions; ++r) {
          const auto t0 = Clock::now();
          run();
          const auto t1 = Clock::now();
          const double ns = double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
          if (ns < 10 * tick_ns) {
            std::ostringstream os;
            os << method << " L=" << length << ": run shorter than 10 timer ticks (" << ns << " ns, tick "
               << tick_ns << " ns); timing unreliable";
            report.warnings.push_back(os.str());
          }
          ms.push_back(ns * 1e-6);
        }
        row.median_ms = quantile(ms, 0.5);
        row.p25_ms = quantile(ms, 0.25);
        row.p75_ms = quantile(ms, 0.75);
      } catch (const std::bad_alloc&) {
        row.ok = false;
        row.note = "allocation failed; cap L";
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Resource) throw;
        row.ok = false;
        row.note = e.what();
      }
      if (progress) {
        if (row.ok)
          *progress << method << " L=" << length << " median " << std::fixed << std::setprecision(2)
                    << row.median_ms << " ms" << std::defaultfloat << std::endl;
        else
          *progress << method << " L=" << length << " skipped: " << row.note << std::endl;
      }
      report.rows.push_back(row);
    }
  }

  for (const auto& method : kBenchMethods) {
    std::vector<double> x, y;
    for (const auto& r : report.rows)
      if (r.method == method && r.ok &&
          std::find(cfg.lengths.begin(), cfg.lengths.end(), r.length) != cfg.lengths.end()) {
        x.push_back(double(r.length));
        y.push_back(r.median_ms);
      }
    if (x.size() >= 2)
      report.slopes[method] = loglog_slope(x, y);
    else
      report.warnings.push_back(method + ": fewer than two timed lengths, no slope");
  }
  return report;
}

void write_bench_csv(const fs::path& path, const BenchReport& report)
{
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "method,L,median_ms,p25_ms,p75_ms,param_bytes\n" << std::setprecision(8);
  for (const auto& r : report.rows)
    if (r.ok)
      out << r.method << ',' << r.length << ',' << r.median_ms << ',' << r.p25_ms << ',' << r.p75_ms << ','
          << r.param_bytes << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

std::string bench_summary(const BenchReport& report)
{
  std::ostringstream os;
  os << std::left << std::setw(16) << "method" << std::right << std::setw(9) << "L" << std::setw(14)
     << "median_ms" << std::setw(12) << "p25_ms" << std::setw(12) << "p75_ms" << std::setw(13)
     << "param_bytes" << '\n';
  for (const auto& r : report.rows) {
    os << std::left << std::setw(16) << r.method << std::right << std::setw(9) << r.length;
    if (r.ok)
      os << std::fixed << std::setprecision(3) << std::setw(14) << r.median_ms << std::setw(12) << r.p25_ms
         << std::setw(12) << r.p75_ms << std::defaultfloat << std::setw(13) << r.param_bytes << '\n';
    else
      os << "  skipped: " << r.note << '\n';
  }
  os << "\nlog-log slopes\n";
  for (const auto& [method, slope] : report.slopes)
    os << "  " << std::left << std::setw(16) << method << std::right << std::fixed << std::setprecision(2)
       << slope << std::defaultfloat << '\n';
  os << "default trunk parameters: " << report.default_trunk_bytes << " bytes ("
     << std::fixed << std::setprecision(2) << double(report.default_trunk_bytes) / 1e6 << " MB)\n"
     << std::defaultfloat;
  for (const auto& w : report.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace survmamba
