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

// survmamba: synth | train | eval | bench

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <new>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "survmamba/config.hpp"

namespace fs = std::filesystem;
using namespace survmamba;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kDataFormat = 3,
  kNumeric = 4,
  kResource = 5,
  kDegenerate = 6,
  kIo = 7,
};

int exit_code(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::Config: return kConfig;
    case ErrorKind::Format:
    case ErrorKind::Alignment: return kDataFormat;
    case ErrorKind::Numeric: return kNumeric;
    case ErrorKind::Resource: return kResource;
    case ErrorKind::UndefinedMetric: return kDegenerate;
    case ErrorKind::Io: return kIo;
    default: return kInternal;
  }
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<Index> fold;
  std::string manifest;
  std::string checkpoint;
  bool disable_pfe = false;
  bool disable_liam = false;
  bool disable_giem = false;
};

RunConfig resolve(const Options& o)
{
  RunConfig cfg = o.config.empty() ? parse_run_config("") : load_run_config(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.fold) cfg.train.fold = *o.fold;
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  cfg.model.disable_pfe |= o.disable_pfe;
  cfg.model.disable_liam |= o.disable_liam;
  cfg.model.disable_giem |= o.disable_giem;
  return cfg;
}

void ensure_dir(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

int cmd_synth(const RunConfig& cfg)
{
  ensure_dir(cfg.out_dir);
  const SyntheticCohort cohort = synth_generate(cfg.synth, cfg.out_dir);
  std::cout << "cases:          " << cfg.synth.cases << '\n'
            << "manifest:       " << cohort.manifest.string() << '\n'
            << "ground truth:   " << cohort.ground_truth.string() << '\n'
            << "oracle C-index: " << std::fixed << std::setprecision(4) << cohort.oracle_c_index << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg)
{
  if (cfg.manifest.empty()) fail(ErrorKind::Config, "train: no manifest (set `manifest` or pass --manifest)");
  const Manifest manifest = read_manifest(cfg.manifest);
  const TrainResult r = train_model(cfg.model, cfg.train, manifest, cfg.out_dir, &std::cout);
  std::cout << std::fixed << std::setprecision(6) << "best epoch:        " << r.best_epoch << '\n'
            << "val C-index:       " << r.val_c_index << '\n'
            << "final C-index:     " << r.final_c_index << "  (full manifest, stored checkpoint)\n"
            << "checkpoint:        " << r.checkpoint.string() << '\n';
  return kOk;
}

void write_predictions(const fs::path& path, const CohortPredictions& preds)
{
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "case_id,risk,time_months,censor\n" << std::setprecision(17);
  for (const auto& p : preds) out << p.case_id << ',' << p.risk << ',' << p.time << ',' << p.censor << '\n';
}

int cmd_eval(const RunConfig& cfg)
{
  if (cfg.checkpoint.empty()) fail(ErrorKind::Config, "eval: no checkpoint (set `checkpoint` or pass --checkpoint)");
  if (cfg.manifest.empty()) fail(ErrorKind::Config, "eval: no manifest (set `manifest` or pass --manifest)");
  const SurvivalModel model = load_model(cfg.checkpoint);
  const Manifest manifest = read_manifest(cfg.manifest);
  const EvalReport r = evaluate(model, manifest);
  ensure_dir(cfg.out_dir);
  write_predictions(cfg.out_dir / "predictions.csv", r.predictions);

  nlohmann::json report = {{"c_index", r.c_index}, {"cases", r.predictions.size()},
                           {"median_risk", r.groups.median}, {"stratified", r.stratified}};
  std::cout << std::fixed << std::setprecision(6) << "C-index:     " << r.c_index << '\n'
            << "median risk: " << r.groups.median << '\n'
            << "groups:      " << r.groups.low.size() << " low / " << r.groups.high.size() << " high\n";
  if (!r.stratified) {
    std::ofstream(cfg.out_dir / "eval.json") << report.dump(2) << '\n';
    std::cerr << "stratification degenerate: every case falls in the low-risk group (all risks <= median)\n";
    return kDegenerate;
  }
  write_km_csv((cfg.out_dir / "km_low.csv").string(), r.km_low);
  write_km_csv((cfg.out_dir / "km_high.csv").string(), r.km_high);
  report["logrank"] = {{"chi_square", r.logrank.chi_square}, {"p_value", r.logrank.p_value}};
  std::ofstream(cfg.out_dir / "eval.json") << report.dump(2) << '\n';
  std::cout << "log-rank:    chi2 " << r.logrank.chi_square << ", p " << std::scientific << std::setprecision(3)
            << r.logrank.p_value << (r.logrank.p_value < 0.05 ? "  (< 0.05)" : "  (>= 0.05)") << '\n';
  return kOk;
}

int cmd_bench(const RunConfig& cfg)
{
  ensure_dir(cfg.out_dir);
  const BenchReport report = run_scaling(cfg.bench, &std::cerr);
  write_bench_csv(cfg.out_dir / "bench.csv", report);
  const std::string summary = bench_summary(report);
  std::ofstream(cfg.out_dir / "bench_summary.txt") << summary;
  std::cout << summary;
  return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Multimodal survival prediction with state-space fusion"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "overrides the configured seed");
    sub->add_option("--out", o.out, "output directory");
  };
  const auto model_flags = [&](CLI::App* sub) {
    sub->add_option("--fold", o.fold, "validation fold of the seeded partition");
    sub->add_option("--manifest", o.manifest, "cohort manifest CSV");
    sub->add_flag("--disable-pfe", o.disable_pfe, "drop the protein path");
    sub->add_flag("--disable-liam", o.disable_liam, "no local interaction blocks");
    sub->add_flag("--disable-giem", o.disable_giem, "no global enhancement blocks");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  common(synth);
  CLI::App* train = app.add_subcommand("train", "train a model and keep the best checkpoint");
  common(train);
  model_flags(train);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  common(eval);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
  eval->add_option("--manifest", o.manifest, "cohort manifest CSV");
  CLI::App* bench = app.add_subcommand("bench", "time fusion against attention baselines");
  common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (*synth) return cmd_synth(cfg);
    if (*train) return cmd_train(cfg);
    if (*eval) return cmd_eval(cfg);
    if (*bench) return cmd_bench(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error (resource): out of memory\n";
    return kResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
