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

#include "survmamba/checkpoint.hpp"

#include <fstream>
#include <map>
#include <set>

#include "survmamba/data.hpp"

namespace survmamba {

namespace fs = std::filesystem;
using nlohmann::json;

void save_checkpoint(const fs::path& dir, const ParamList& params, const json& hyper)
{
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (ec) fail(ErrorKind::Io, "cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  json table = json::array();
  std::set<std::string> names;
  for (const auto& p : params) {
    if (!names.insert(p.name).second) fail(ErrorKind::Contract, "duplicate parameter name " + p.name);
    const Tensor& v = p.var.value();
    const fs::path file = fs::path("params") / (p.name + ".fbag");
    write_feature_bag(dir / file, v.reshaped({v.rows(), v.cols()}), Modality::Histology);
    table.push_back({{"name", p.name}, {"shape", v.shape()}, {"file", file.generic_string()}});
  }
  json meta = {{"format", "survmamba-checkpoint"},
               {"version", kCheckpointVersion},
               {"param_bytes", param_bytes(params)},
               {"params", table},
               {"hyper", hyper}};
  std::ofstream out(dir / "metadata.json");
  if (!out) fail(ErrorKind::Io, "cannot write " + (dir / "metadata.json").string());
  out << meta.dump(2) << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing " + (dir / "metadata.json").string());
}

json read_checkpoint_metadata(const fs::path& dir)
{
  const fs::path path = dir / "metadata.json";
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint metadata " + path.string());
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "survmamba-checkpoint")
    fail(ErrorKind::Format, path.string() + ": not a checkpoint");
  if (meta.value("version", 0) != kCheckpointVersion)
    fail(ErrorKind::Format, path.string() + ": checkpoint version " + meta.value("version", json()).dump() +
                                ", expected " + std::to_string(kCheckpointVersion));
  return meta;
}

json load_checkpoint(const fs::path& dir, const ParamList& params)
{
  const json meta = read_checkpoint_metadata(dir);
  std::map<std::string, json> table;
  for (const auto& entry : meta.at("params")) table[entry.at("name").get<std::string>()] = entry;
  if (table.size() != params.size())
    fail(ErrorKind::Format, "checkpoint holds " + std::to_string(table.size()) + " parameters, model has " +
                                std::to_string(params.size()));
  for (const auto& p : params) {
    auto it = table.find(p.name);
    if (it == table.end()) fail(ErrorKind::Format, "checkpoint lacks parameter " + p.name);
    const Shape shape = it->second.at("shape").get<Shape>();
    if (shape != p.var.shape())
      fail(ErrorKind::Format, "parameter " + p.name + ": checkpoint shape " + shape_str(shape) +
                                  ", model shape " + shape_str(p.var.shape()));
    const FeatureBag bag = read_feature_bag(dir / it->second.at("file").get<std::string>());
    if (bag.values.size() != shape_size(shape))
      fail(ErrorKind::Format, "parameter " + p.name + ": blob size does not match its shape");
    Var v = p.var;
    v.mutable_value() = bag.values.reshaped(shape);
  }
  return meta.value("hyper", json::object());
}

std::vector<Tensor> snapshot(const ParamList& params)
{
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var.value());
  return out;
}

void restore(const ParamList& params, const std::vector<Tensor>& values)
{
  if (values.size() != params.size()) fail(ErrorKind::Contract, "restore: parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var v = params[i].var;
    v.mutable_value() = values[i];
  }
}

}  // namespace survmamba
