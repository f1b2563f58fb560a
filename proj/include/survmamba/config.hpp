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
#include <string>
#include <vector>

#include "survmamba/bench.hpp"
#include "survmamba/data.hpp"
#include "survmamba/train.hpp"

namespace survmamba {

// Plain-text `key = value` configuration. Blank lines and text after '#'
// are ignored; unknown keys are errors. Relative paths resolve against the
// directory holding the config file.
struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir = "out";

  ModelConfig model;
  TrainConfig train;
  SyntheticConfig synth;
  BenchConfig bench;

  // Copies `seed` into every component.
  void set_seed(std::uint64_t s);
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {},
                           const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

// Every recognised key, in documentation order.
std::vector<std::string> run_config_keys();

}  // namespace survmamba
