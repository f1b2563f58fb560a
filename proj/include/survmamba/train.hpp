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
#include <string>
#include <vector>

#include "survmamba/data.hpp"
#include "survmamba/metrics.hpp"
#include "survmamba/model.hpp"

namespace survmamba {

// Decoupled-weight-decay Adam.
class AdamW {
 public:
  struct Options {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;
  };

  AdamW(ParamList params, Options opt);

  // Applies the accumulated gradients, then clears them.
  void step();
  void zero_grad();
  long steps() const { return t_; }

 private:
  ParamList params_;
  Options opt_;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::VectorXd> v_;
  long t_ = 0;
};

struct CaseData {
  std::string case_id;
  Tensor hist;
  Tensor prot;
  double time = 0.0;
  int censor = 0;
};

std::vector<CaseData> load_cases(const Manifest& manifest);

// Validation indices of one fold of a seeded n_folds partition, sorted.
std::vector<std::size_t> fold_indices(std::size_t n, Index n_folds, Index fold, std::uint64_t seed);

struct TrainConfig {
  double lr = 2e-4;
  double weight_decay = 1e-5;
  Index epochs = 100;
  Index accum_steps = 32;
  Index patience = 10;
  Index n_folds = 5;  // the default 80/20 split is fold 0 of 5
  Index fold = 0;
  std::uint64_t seed = 7;
};

struct EpochLog {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_c_index = 0.0;
  double best_val_c_index = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  Index best_epoch = 0;
  double best_val_c_index = 0.0;
  // Recomputed from the saved checkpoint.
  double val_c_index = 0.0;
  double final_c_index = 0.0;  // over the full manifest
  std::filesystem::path checkpoint;
};

// Trains on the manifest, writing under out_dir:
//   checkpoint/          best parameters and metadata
//   train_log.csv        one row per epoch (epoch 0 is the untrained model)
//   train_manifest.csv   the training split
//   val_manifest.csv     the validation split
//   summary.json
TrainResult train_model(const ModelConfig& model_cfg, const TrainConfig& cfg, const Manifest& manifest,
                        const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

CohortPredictions predict(const SurvivalModel& model, const std::vector<CaseData>& cases);

// Rebuilds the model recorded in a checkpoint and loads its parameters.
SurvivalModel load_model(const std::filesystem::path& checkpoint);

struct EvalReport {
  CohortPredictions predictions;
  double c_index = 0.0;
  RiskGroups groups;
  bool stratified = false;  // false when one risk group is empty
  KMCurve km_low;
  KMCurve km_high;
  LogRankResult logrank;
};

// C-index, median split, per-group Kaplan-Meier curves and log-rank test.
EvalReport evaluate(const SurvivalModel& model, const Manifest& manifest);

}  // namespace survmamba
