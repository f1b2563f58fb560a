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

#include "survmamba/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

namespace survmamba {

namespace fs = std::filesystem;

void RunConfig::set_seed(std::uint64_t s)
{
  seed = s;
  model.seed = s;
  train.seed = s;
  synth.seed = s;
  bench.seed = s;
}

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Parser {
  std::string where;
  std::string value;

  [[noreturn]] void bad(const std::string& what) const
  {
    fail(ErrorKind::Config, where + ": " + what + " '" + value + "'");
  }

  std::int64_t integer() const
  {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad("expected an integer, got");
    return v;
  }

  std::uint64_t unsigned_integer() const
  {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) bad("expected a non-negative integer, got");
    return v;
  }

  double real() const
  {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) bad("expected a number, got");
      return v;
    } catch (const std::logic_error&) {
      bad("expected a number, got");
    }
  }

  bool boolean() const
  {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    bad("expected true or false, got");
  }

  std::vector<Index> integer_list() const
  {
    std::vector<Index> out;
    std::istringstream is(value);
    std::string item;
    while (std::getline(is, item, ',')) {
      Parser p{where, trim(item)};
      out.push_back(p.integer());
    }
    if (out.empty()) bad("expected a comma-separated list, got");
    return out;
  }
};

using Setter = std::function<void(RunConfig&, const Parser&, const fs::path&)>;

fs::path resolve(const fs::path& base, const std::string& value)
{
  const fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

const std::vector<std::pair<std::string, Setter>>& setters()
{
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"seed", [](RunConfig& c, const Parser& p, const fs::path&) { c.set_seed(p.unsigned_integer()); }},
      {"manifest", [](RunConfig& c, const Parser& p, const fs::path& b) { c.manifest = resolve(b, p.value); }},
      {"checkpoint", [](RunConfig& c, const Parser& p, const fs::path& b) { c.checkpoint = resolve(b, p.value); }},
      {"out", [](RunConfig& c, const Parser& p, const fs::path& b) { c.out_dir = resolve(b, p.value); }},
      // model
      {"n_bins", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.n_bins = p.integer(); }},
      {"n_local", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.n_local = p.integer(); }},
      {"n_global", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.n_global = p.integer(); }},
      {"d_model", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.d_model = p.integer(); }},
      {"hidden", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.hidden = p.integer(); }},
      {"state", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.state = p.integer(); }},
      {"expand", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.expand = p.integer(); }},
      {"conv_width", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.conv_width = p.integer(); }},
      {"selective", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.selective = p.boolean(); }},
      {"skip", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.skip = p.boolean(); }},
      {"global_residual",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.model.global_residual = p.boolean(); }},
      {"disable_pfe", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.disable_pfe = p.boolean(); }},
      {"disable_liam", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.disable_liam = p.boolean(); }},
      {"disable_giem", [](RunConfig& c, const Parser& p, const fs::path&) { c.model.disable_giem = p.boolean(); }},
      // training
      {"lr", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.lr = p.real(); }},
      {"weight_decay", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.weight_decay = p.real(); }},
      {"epochs", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.epochs = p.integer(); }},
      {"accum_steps", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.accum_steps = p.integer(); }},
      {"patience", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.patience = p.integer(); }},
      {"n_folds", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.n_folds = p.integer(); }},
      {"fold", [](RunConfig& c, const Parser& p, const fs::path&) { c.train.fold = p.integer(); }},
      // synthetic cohort
      {"cases", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.cases = p.integer(); }},
      {"min_patches", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.min_patches = p.integer(); }},
      {"max_patches", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.max_patches = p.integer(); }},
      {"hist_dim",
       [](RunConfig& c, const Parser& p, const fs::path&) {
         c.synth.hist_dim = c.model.hist_dim = c.bench.hist_dim = p.integer();
       }},
      {"prot_dim",
       [](RunConfig& c, const Parser& p, const fs::path&) {
         c.synth.prot_dim = c.model.prot_dim = c.bench.prot_dim = p.integer();
       }},
      {"beta", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.beta = p.real(); }},
      {"censor_fraction",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.censor_fraction = p.real(); }},
      {"hist_signal", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.hist_signal = p.real(); }},
      {"prot_signal", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.prot_signal = p.real(); }},
      {"prot_noise_var",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.prot_noise_var = p.real(); }},
      {"time_scale", [](RunConfig& c, const Parser& p, const fs::path&) { c.synth.time_scale = p.real(); }},
      // benchmark
      {"bench_lengths",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.lengths = p.integer_list(); }},
      {"bench_optional_length",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.optional_length = p.integer(); }},
      {"bench_include_optional",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.include_optional = p.boolean(); }},
      {"bench_d_model", [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.d_model = p.integer(); }},
      {"bench_n_local", [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.n_local = p.integer(); }},
      {"bench_n_global", [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.n_global = p.integer(); }},
      {"bench_queries", [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.queries = p.integer(); }},
      {"bench_repetitions",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.repetitions = p.integer(); }},
      {"bench_warmup", [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.warmup = p.integer(); }},
      {"bench_block", [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.block = p.integer(); }},
      {"bench_memory_limit_mb",
       [](RunConfig& c, const Parser& p, const fs::path&) { c.bench.memory_limit_mb = p.real(); }},
  };
  return table;
}

}  // namespace

std::vector<std::string> run_config_keys()
{
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir, const std::string& origin)
{
  RunConfig cfg;
  cfg.set_seed(cfg.seed);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const Parser parser{where, trim(line.substr(eq + 1))};
    if (parser.value.empty()) fail(ErrorKind::Config, where + ": empty value for " + key);
    bool found = false;
    for (const auto& [name, set] : setters())
      if (name == key) {
        set(cfg, parser, base_dir);
        found = true;
        break;
      }
    if (!found) fail(ErrorKind::Config, where + ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path(), path.string());
}

}  // namespace survmamba
