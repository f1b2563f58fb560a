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
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "survmamba/tensor.hpp"

namespace survmamba {

///////////////////////////////////////////
// Feature bag files
///////////////////////////////////////////

// Layout, little-endian:
//   0  char[4] "FBAG"
//   4  u16     format version (1)
//   6  u32     N rows
//   10 u32     D columns
//   14 u8      modality tag
//   15 f32     payload, N*D values row-major
enum class Modality : std::uint8_t { Histology = 0, ProteinGrid = 1, ProteinPatch = 2 };

inline constexpr std::uint16_t kBagVersion = 1;
inline constexpr std::size_t kBagHeaderBytes = 15;

enum class BagFault {
  BadMagic,
  BadVersion,
  TruncatedHeader,
  TruncatedPayload,
  TrailingBytes,
  EmptyBag,
  BadModality,
};

const char* to_string(BagFault fault);

class FeatureBagError : public Error {
 public:
  FeatureBagError(BagFault fault, std::size_t offset, const std::string& what)
    : Error(ErrorKind::Format, what), fault_(fault), offset_(offset) {}

  BagFault fault() const noexcept { return fault_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  BagFault fault_;
  std::size_t offset_;
};

struct FeatureBag {
  Tensor values;  // [N x D]
  Modality modality = Modality::Histology;
};

std::vector<std::uint8_t> encode_feature_bag(const Tensor& values, Modality modality);
FeatureBag decode_feature_bag(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void write_feature_bag(const std::filesystem::path& path, const Tensor& values, Modality modality);
FeatureBag read_feature_bag(const std::filesystem::path& path);

///////////////////////////////////////////
// Cohort manifest
///////////////////////////////////////////

struct ManifestRow {
  std::string case_id;
  std::filesystem::path histology_path;  // as written; resolve against the manifest directory
  std::filesystem::path protein_path;
  double time_months = 0.0;
  int censor = 0;
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<ManifestRow> rows;

  std::filesystem::path resolve(const std::filesystem::path& p) const
  {
    return p.is_absolute() ? p : directory / p;
  }
};

// Validates censor flags and times; file existence is checked when
// `check_files` is set.
Manifest read_manifest(const std::filesystem::path& path, bool check_files = true);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

std::vector<std::pair<std::string, double>> read_ground_truth(const std::filesystem::path& path);

///////////////////////////////////////////
// Protein aggregation
///////////////////////////////////////////

// Mean over G grid predictions per marker, then min-max across the M
// markers; a zero range maps every marker to 0. [G x M] -> [1 x M]
Tensor pfe_aggregate(const Tensor& grid_predictions);

///////////////////////////////////////////
// Time binning
///////////////////////////////////////////

struct RawRecord {
  std::string case_id;
  double time = 0.0;
  int censor = 0;
};

struct TimeBins {
  std::vector<double> cuts;  // n-1 interior cut points, ascending

  Index bins() const { return static_cast<Index>(cuts.size()) + 1; }
  // 1-based interval; times equal to a cut fall in the lower interval.
  Index label(double time) const;
  // 0, cuts..., +inf
  std::vector<double> boundaries() const;
};

// Cuts at the i/n quantiles (linear interpolation) of uncensored times.
TimeBins bin_times(const std::vector<RawRecord>& records, Index n_bins);

///////////////////////////////////////////
// Weighted sampling
///////////////////////////////////////////

// Infinite stream of case indices; each case is drawn with probability
// proportional to 1 / |stratum|, stratum = (interval label, censor flag).
class WeightedSampler {
 public:
  WeightedSampler(const std::vector<std::pair<Index, int>>& strata, std::uint64_t seed);

  Index next();
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
  std::mt19937_64 rng_;
  std::discrete_distribution<Index> dist_;
};

///////////////////////////////////////////
// Synthetic cohorts
///////////////////////////////////////////

struct SyntheticConfig {
  Index cases = 500;
  Index min_patches = 8;
  Index max_patches = 24;
  Index hist_dim = 512;
  Index prot_dim = 50;
  double beta = 1.5;             // event rate exp(beta * r)
  double censor_fraction = 0.3;  // in [0, 1)
  double hist_signal = 0.25;     // |u_h|
  double prot_signal = 0.25;     // |u_p|
  double prot_noise_var = 0.5;
  double time_scale = 24.0;      // months per unit of the exponential clock
  std::uint64_t seed = 7;
};

struct SyntheticCohort {
  std::filesystem::path manifest;
  std::filesystem::path ground_truth;
  double oracle_c_index = 0.0;
};

// Writes bags/<id>_hist.fbag, bags/<id>_prot.fbag, manifest.csv and
// ground_truth.csv (case_id, r) under out_dir.
SyntheticCohort synth_generate(const SyntheticConfig& cfg, const std::filesystem::path& out_dir);

// C-index of the manifest's outcomes ranked by the latent r.
double oracle_c_index(const std::filesystem::path& ground_truth, const std::filesystem::path& manifest);

}  // namespace survmamba
