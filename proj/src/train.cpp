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

#include "survmamba/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "survmamba/checkpoint.hpp"

namespace survmamba {

namespace fs = std::filesystem;
using nlohmann::json;

///////////////////////////////////////////
// AdamW
///////////////////////////////////////////

AdamW::AdamW(ParamList params, Options opt) : params_(std::move(params)), opt_(opt)
{
  if (!(opt_.lr > 0)) fail(ErrorKind::Config, "learning rate must be positive");
  if (opt_.weight_decay < 0) fail(ErrorKind::Config, "weight decay must be non-negative");
  for (const auto& p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p.var.size()));
    v_.push_back(Eigen::VectorXd::Zero(p.var.size()));
  }
}

void AdamW::step()
{
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, double(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var p = params_[i].var;
    if (!p.has_grad()) continue;
    const Tensor g = p.grad();
    auto w = p.mutable_value().storage().array();
    const auto ga = g.storage().array();
    m_[i].array() = opt_.beta1 * m_[i].array() + (1 - opt_.beta1) * ga;
    v_[i].array() = opt_.beta2 * v_[i].array() + (1 - opt_.beta2) * ga.square();
    w *= 1.0 - opt_.lr * opt_.weight_decay;
    w -= opt_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
  }
  zero_grad();
}

void AdamW::zero_grad()
{
  for (auto& p : params_) {
    Var v = p.var;
    v.zero_grad();
  }
}

///////////////////////////////////////////
// Data
///////////////////////////////////////////

std::vector<CaseData> load_cases(const Manifest& manifest)
{
  std::vector<CaseData> out;
  out.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    FeatureBag hist = read_feature_bag(manifest.resolve(row.histology_path));
    FeatureBag prot = read_feature_bag(manifest.resolve(row.protein_path));
    if (hist.modality != Modality::Histology)
      fail(ErrorKind::Format, row.case_id + ": histology bag carries modality tag " +
                                  std::to_string(int(hist.modality)));
    if (prot.modality != Modality::ProteinPatch)
      fail(ErrorKind::Format, row.case_id + ": protein bag carries modality tag " +
                                  std::to_string(int(prot.modality)) + ", expected patch-level (2)");
    if (hist.values.rows() != prot.values.rows())
      fail(ErrorKind::Alignment, row.case_id + ": " + std::to_string(hist.values.rows()) +
                                     " histology patches vs " + std::to_string(prot.values.rows()) +
                                     " protein patches");
    out.push_back({row.case_id, std::move(hist.values), std::move(prot.values), row.time_months, row.censor});
  }
  return out;
}

std::vector<std::size_t> fold_indices(std::size_t n, Index n_folds, Index fold, std::uint64_t seed)
{
  if (n_folds < 2) fail(ErrorKind::Config, "n_folds must be at least 2");
  if (fold < 0 || fold >= n_folds)
    fail(ErrorKind::Config, "fold " + std::to_string(fold) + " outside 0.." + std::to_string(n_folds - 1));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val;
  for (std::size_t i = 0; i < n; ++i)
    if (static_cast<Index>(i % std::size_t(n_folds)) == fold) val.push_back(order[i]);
  std::sort(val.begin(), val.end());
  return val;
}

CohortPredictions predict(const SurvivalModel& model, const std::vector<CaseData>& cases)
{
  CohortPredictions out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    try {
      out.push_back({c.case_id, model.risk(c.hist, c.prot), c.time, c.censor});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
      fail(ErrorKind::Numeric, "case " + c.case_id + ": " + e.what());
    }
  }
  return out;
}

///////////////////////////////////////////
// Training
///////////////////////////////////////////

namespace {

std::vector<ManifestRow> manifest_rows(const Manifest& m, const std::vector<std::size_t>& idx)
{
  std::vector<ManifestRow> rows;
  for (std::size_t i : idx) {
    ManifestRow r = m.rows[i];
    r.histology_path = fs::absolute(m.resolve(r.histology_path));
    r.protein_path = fs::absolute(m.resolve(r.protein_path));
    rows.push_back(std::move(r));
  }
  return rows;
}

json train_json(const TrainConfig& c)
{
  return {{"lr", c.lr},           {"weight_decay", c.weight_decay}, {"epochs", c.epochs},
          {"accum_steps", c.accum_steps}, {"patience", c.patience}, {"n_folds", c.n_folds},
          {"fold", c.fold},       {"seed", c.seed}};
}

}  // namespace

TrainResult train_model(const ModelConfig& model_cfg, const TrainConfig& cfg, const Manifest& manifest,
                        const fs::path& out_dir, std::ostream* progress)
{
  if (cfg.epochs < 0) fail(ErrorKind::Config, "epochs must be non-negative");
  if (cfg.accum_steps < 1) fail(ErrorKind::Config, "accum_steps must be at least 1");
  if (cfg.patience < 1) fail(ErrorKind::Config, "patience must be at least 1");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  const std::vector<CaseData> cases = load_cases(manifest);
  const auto val_idx = fold_indices(cases.size(), cfg.n_folds, cfg.fold, cfg.seed);
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0, j = 0; i < cases.size(); ++i) {
    if (j < val_idx.size() && val_idx[j] == i)
      ++j;
    else
      train_idx.push_back(i);
  }
  if (train_idx.empty() || val_idx.empty()) fail(ErrorKind::Config, "cohort too small to split");
  write_manifest(out_dir / "train_manifest.csv", manifest_rows(manifest, train_idx));
  write_manifest(out_dir / "val_manifest.csv", manifest_rows(manifest, val_idx));

  std::vector<RawRecord> records;
  for (std::size_t i : train_idx) records.push_back({cases[i].case_id, cases[i].time, cases[i].censor});
  const TimeBins bins = bin_times(records, model_cfg.n_bins);
  std::vector<Index> labels;
  std::vector<std::pair<Index, int>> strata;
  for (std::size_t i : train_idx) {
    labels.push_back(bins.label(cases[i].time));
    strata.emplace_back(labels.back(), cases[i].censor);
  }
  std::vector<CaseData> val_cases;
  for (std::size_t i : val_idx) val_cases.push_back(cases[i]);

  SurvivalModel model(model_cfg);
  const ParamList params = model.params();
  AdamW opt(params, {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  WeightedSampler sampler(strata, cfg.seed ^ 0x5851f42d4c957f2dULL);

  TrainResult result;
  std::ofstream log(out_dir / "train_log.csv");
  if (!log) fail(ErrorKind::Io, "cannot write " + (out_dir / "train_log.csv").string());
  log << "epoch,train_loss,val_c_index,best_val_c_index,seconds\n" << std::setprecision(10);
  const auto record = [&](const EpochLog& e) {
    result.log.push_back(e);
    log << e.epoch << ',' << e.train_loss << ',' << e.val_c_index << ',' << e.best_val_c_index << ','
        << e.seconds << '\n';
    log.flush();
    if (progress)
      *progress << "epoch " << e.epoch << "  loss " << std::fixed << std::setprecision(4) << e.train_loss
                << "  val C " << e.val_c_index << "  best " << e.best_val_c_index << "  ("
                << std::setprecision(1) << e.seconds << " s)" << std::defaultfloat << std::endl;
  };

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  double best = c_index(predict(model, val_cases));
  std::vector<Tensor> best_params = snapshot(params);
  record({0, 0.0, best, best, std::chrono::duration<double>(clock::now() - t0).count()});

  const double loss_scale = 1.0 / double(cfg.accum_steps);
  Index pending = 0;
  Index stall = 0;
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    t0 = clock::now();
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < train_idx.size(); ++step) {
      const Index pick = sampler.next();
      const CaseData& c = cases[train_idx[static_cast<std::size_t>(pick)]];
      Tape tape;
      TapeScope scope(tape);
      try {
        const Var h = model.hazards(c.hist, c.prot);
        const Var loss = survival_nll(h, labels[static_cast<std::size_t>(pick)], c.censor);
        if (!std::isfinite(loss.value().item())) fail(ErrorKind::Numeric, "non-finite loss");
        loss_sum += loss.value().item();
        backward(tape, scale(loss, loss_scale));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        fail(ErrorKind::Numeric, "epoch " + std::to_string(epoch) + ", case " + c.case_id + ": " + e.what());
      }
      if (++pending == cfg.accum_steps) {
        opt.step();
        pending = 0;
      }
    }
    const double val = c_index(predict(model, val_cases));
    if (val > best) {
      best = val;
      best_params = snapshot(params);
      result.best_epoch = epoch;
      stall = 0;
    } else {
      ++stall;
    }
    record({epoch, loss_sum / double(train_idx.size()), val, best,
            std::chrono::duration<double>(clock::now() - t0).count()});
    if (stall >= cfg.patience) break;
  }
  result.best_val_c_index = best;

  restore(params, best_params);
  result.checkpoint = out_dir / "checkpoint";
  const json hyper = {{"model", to_json(model_cfg)},
                      {"train", train_json(cfg)},
                      {"time_bins", bins.cuts},
                      {"best_epoch", result.best_epoch}};
  save_checkpoint(result.checkpoint, params, hyper);

  // Metrics are recomputed from the stored 32-bit parameters so that
  // evaluating the checkpoint later reproduces them exactly.
  const SurvivalModel stored = load_model(result.checkpoint);
  result.val_c_index = c_index(predict(stored, val_cases));
  result.final_c_index = c_index(predict(stored, cases));

  json summary = {{"best_epoch", result.best_epoch},
                  {"best_val_c_index", result.best_val_c_index},
                  {"val_c_index", result.val_c_index},
                  {"final_c_index", result.final_c_index},
                  {"epochs_run", Index(result.log.size()) - 1},
                  {"optimizer_steps", opt.steps()},
                  {"n_train", train_idx.size()},
                  {"n_val", val_idx.size()},
                  {"param_bytes", param_bytes(params)},
                  {"model", to_json(model_cfg)},
                  {"train", train_json(cfg)}};
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << '\n';
  return result;
}

SurvivalModel load_model(const fs::path& checkpoint)
{
  const json meta = read_checkpoint_metadata(checkpoint);
  if (!meta.contains("hyper") || !meta["hyper"].contains("model"))
    fail(ErrorKind::Format, checkpoint.string() + ": metadata lacks the model configuration");
  SurvivalModel model(model_config_from_json(meta["hyper"]["model"]));
  load_checkpoint(checkpoint, model.params());
  return model;
}

EvalReport evaluate(const SurvivalModel& model, const Manifest& manifest)
{
  const std::vector<CaseData> cases = load_cases(manifest);
  const ModelConfig& mc = model.config();
  for (const auto& c : cases)
    if (c.hist.cols() != mc.hist_dim || c.prot.cols() != mc.prot_dim)
      fail(ErrorKind::Format, c.case_id + ": bag widths " + std::to_string(c.hist.cols()) + "/" +
                                  std::to_string(c.prot.cols()) + " do not match the checkpoint's " +
                                  std::to_string(mc.hist_dim) + "/" + std::to_string(mc.prot_dim));
  EvalReport r;
  r.predictions = predict(model, cases);
  r.c_index = c_index(r.predictions);
  r.groups = median_split(r.predictions);
  r.stratified = !r.groups.low.empty() && !r.groups.high.empty();
  if (r.stratified) {
    r.km_low = km_estimate(r.groups.low);
    r.km_high = km_estimate(r.groups.high);
    r.logrank = logrank_test(r.groups.low, r.groups.high);
  }
  return r;
}

}  // namespace survmamba
