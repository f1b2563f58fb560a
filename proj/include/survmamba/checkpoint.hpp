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

#include <filesystem>

#include <json.hpp>

#include "survmamba/nn.hpp"

namespace survmamba {

// A checkpoint is a directory holding one feature-bag blob per parameter
// (params/<name>.fbag, stored [rows x cols]) and metadata.json with the
// parameter table and caller-supplied hyperparameters.
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const ParamList& params,
                     const nlohmann::json& hyper);

// Reads metadata.json only.
nlohmann::json read_checkpoint_metadata(const std::filesystem::path& dir);

// Loads every blob into the matching parameter. Names and shapes must
// match exactly; returns the stored hyperparameters.
nlohmann::json load_checkpoint(const std::filesystem::path& dir, const ParamList& params);

// Copies parameter values, e.g. to snapshot the best model in memory.
std::vector<Tensor> snapshot(const ParamList& params);
void restore(const ParamList& params, const std::vector<Tensor>& values);

}  // namespace survmamba
