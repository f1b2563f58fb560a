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

#include "survmamba/data.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "survmamba/metrics.hpp"

namespace survmamba {

namespace fs = std::filesystem;

const char* to_string(BagFault fault)
{
  switch (fault) {
    case BagFault::BadMagic: return "bad magic";
    case BagFault::BadVersion: return "unsupported version";
    case BagFault::TruncatedHeader: return "truncated header";
    case BagFault::TruncatedPayload: return "truncated payload";
    case BagFault::TrailingBytes: return "trailing bytes";
    case BagFault::EmptyBag: return "empty bag";
    case BagFault::BadModality: return "bad modality tag";
  }
  return "unknown";
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

[[noreturn]] void bag_fail(BagFault fault, std::size_t offset, const std::string& origin,
                           const std::string& detail)
{
  std::ostringstream os;
  os << origin << ": " << to_string(fault) << " at byte " << offset << " (" << detail << ")";
  throw FeatureBagError(fault, offset, os.str());
}

}  // namespace

std::vector<std::uint8_t> encode_feature_bag(const Tensor& values, Modality modality)
{
  if (values.rank() != 2) fail(ErrorKind::Dimension, "feature bag must be [N x D]");
  const auto n = static_cast<std::uint32_t>(values.rows());
  const auto d = static_cast<std::uint32_t>(values.cols());
  std::vector<std::uint8_t> out;
  out.reserve(kBagHeaderBytes + std::size_t(n) * d * 4);
  for (char c : {'F', 'B', 'A', 'G'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kBagVersion);
  put_u32(out, n);
  put_u32(out, d);
  out.push_back(static_cast<std::uint8_t>(modality));
  for (Index i = 0; i < values.size(); ++i)
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
  return out;
}

FeatureBag decode_feature_bag(const std::vector<std::uint8_t>& bytes, const std::string& origin)
{
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "FBAG", 4) != 0) {
    if (bytes.size() < 4)
      bag_fail(BagFault::TruncatedHeader, bytes.size(), origin, "need 15 header bytes");
    bag_fail(BagFault::BadMagic, 0, origin, "expected \"FBAG\"");
  }
  if (bytes.size() < kBagHeaderBytes)
    bag_fail(BagFault::TruncatedHeader, bytes.size(), origin,
             "need 15 header bytes, have " + std::to_string(bytes.size()));
  const std::uint16_t version = std::uint16_t(bytes[4] | (bytes[5] << 8));
  if (version != kBagVersion)
    bag_fail(BagFault::BadVersion, 4, origin, "version " + std::to_string(version) + ", expected " +
                                                  std::to_string(kBagVersion));
  const std::uint32_t n = get_u32(bytes.data() + 6);
  const std::uint32_t d = get_u32(bytes.data() + 10);
  if (n == 0 || d == 0)
    bag_fail(BagFault::EmptyBag, n == 0 ? 6 : 10, origin,
             "N=" + std::to_string(n) + ", D=" + std::to_string(d));
  const std::uint8_t tag = bytes[14];
  if (tag > static_cast<std::uint8_t>(Modality::ProteinPatch))
    bag_fail(BagFault::BadModality, 14, origin, "tag " + std::to_string(tag));

  const std::size_t expected = kBagHeaderBytes + std::size_t(n) * d * 4;
  if (bytes.size() < expected)
    bag_fail(BagFault::TruncatedPayload, bytes.size(), origin,
             "expected " + std::to_string(expected) + " bytes, have " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    bag_fail(BagFault::TrailingBytes, expected, origin,
             "expected " + std::to_string(expected) + " bytes, have " + std::to_string(bytes.size()));

  FeatureBag bag{Tensor({Index(n), Index(d)}), static_cast<Modality>(tag)};
  const std::uint8_t* p = bytes.data() + kBagHeaderBytes;
  for (Index i = 0; i < bag.values.size(); ++i, p += 4)
    bag.values[i] = static_cast<double>(std::bit_cast<float>(get_u32(p)));
  return bag;
}

void write_feature_bag(const fs::path& path, const Tensor& values, Modality modality)
{
  const auto bytes = encode_feature_bag(values, modality);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

FeatureBag read_feature_bag(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_feature_bag(bytes, path.string());
}

///////////////////////////////////////////
// Manifest
///////////////////////////////////////////

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s)
{
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& s, const std::string& where)
{
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Format, where + ": not a number: '" + s + "'");
  }
}

}  // namespace

Manifest read_manifest(const fs::path& path, bool check_files)
{
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  Manifest m;
  m.directory = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Format, path.string() + ": empty manifest");
  const std::vector<std::string> expected = {"case_id", "histology_path", "protein_path",
                                             "time_months", "censor"};
  auto header = split_csv_line(trim(line));
  for (auto& h : header) h = trim(h);
  if (header != expected)
    fail(ErrorKind::Format, path.string() +
                                ": header must be case_id,histology_path,protein_path,time_months,censor");
  std::size_t line_no = 1;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto f = split_csv_line(line);
    if (f.size() != 5) fail(ErrorKind::Format, where + ": expected 5 fields");
    ManifestRow row{trim(f[0]), trim(f[1]), trim(f[2]), parse_double(trim(f[3]), where), 0};
    const std::string c = trim(f[4]);
    if (c != "0" && c != "1") fail(ErrorKind::Format, where + ": censor must be 0 or 1");
    row.censor = c == "1";
    if (!(row.time_months > 0)) fail(ErrorKind::Format, where + ": time must be positive");
    if (seen[row.case_id]) fail(ErrorKind::Format, where + ": duplicate case id " + row.case_id);
    seen[row.case_id] = true;
    if (check_files) {
      for (const auto& p : {row.histology_path, row.protein_path})
        if (!fs::exists(m.resolve(p))) fail(ErrorKind::Io, where + ": missing file " + m.resolve(p).string());
    }
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty()) fail(ErrorKind::Format, path.string() + ": no cases");
  return m;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows)
{
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write manifest " + path.string());
  out << "case_id,histology_path,protein_path,time_months,censor\n";
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.case_id << ',' << r.histology_path.generic_string() << ','
        << r.protein_path.generic_string() << ',' << r.time_months << ',' << r.censor << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

std::vector<std::pair<std::string, double>> read_ground_truth(const fs::path& path)
{
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "ground truth file missing: " + path.string());
  std::string line;
  std::getline(in, line);
  if (trim(line) != "case_id,r") fail(ErrorKind::Format, path.string() + ": header must be case_id,r");
  std::vector<std::pair<std::string, double>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 2) fail(ErrorKind::Format, where + ": expected 2 fields");
    out.emplace_back(trim(f[0]), parse_double(trim(f[1]), where));
  }
  return out;
}

///////////////////////////////////////////
// Protein aggregation
///////////////////////////////////////////

Tensor pfe_aggregate(const Tensor& grid_predictions)
{
  if (grid_predictions.rank() != 2 || grid_predictions.rows() < 1)
    fail(ErrorKind::Domain, "pfe_aggregate: need at least one grid row");
  Tensor out({1, grid_predictions.cols()});
  auto means = out.matrix();
  means = grid_predictions.matrix().colwise().mean();
  const double lo = means.minCoeff();
  const double range = means.maxCoeff() - lo;
  if (range > 0)
    means.array() = (means.array() - lo) / range;
  else
    means.setZero();
  return out;
}

///////////////////////////////////////////
// Time binning
///////////////////////////////////////////

Index TimeBins::label(double time) const
{
  return 1 + static_cast<Index>(std::lower_bound(cuts.begin(), cuts.end(), time) - cuts.begin());
}

std::vector<double> TimeBins::boundaries() const
{
  std::vector<double> b{0.0};
  b.insert(b.end(), cuts.begin(), cuts.end());
  b.push_back(std::numeric_limits<double>::infinity());
  return b;
}

TimeBins bin_times(const std::vector<RawRecord>& records, Index n_bins)
{
  if (n_bins < 1) fail(ErrorKind::Config, "bin_times: need at least one interval");
  std::vector<double> events;
  for (const auto& r : records)
    if (r.censor == 0) events.push_back(r.time);
  if (static_cast<Index>(events.size()) < n_bins)
    fail(ErrorKind::Config, "bin_times: " + std::to_string(events.size()) +
                                " uncensored events cannot fill " + std::to_string(n_bins) + " intervals");
  std::sort(events.begin(), events.end());
  TimeBins bins;
  const double last = static_cast<double>(events.size() - 1);
  for (Index i = 1; i < n_bins; ++i) {
    const double pos = last * double(i) / double(n_bins);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, events.size() - 1);
    bins.cuts.push_back(events[lo] + (pos - double(lo)) * (events[hi] - events[lo]));
  }
  return bins;
}

///////////////////////////////////////////
// Weighted sampling
///////////////////////////////////////////

WeightedSampler::WeightedSampler(const std::vector<std::pair<Index, int>>& strata, std::uint64_t seed)
  : rng_(seed)
{
  if (strata.empty()) fail(ErrorKind::Domain, "WeightedSampler: no cases");
  std::map<std::pair<Index, int>, double> counts;
  for (const auto& s : strata) counts[s] += 1.0;
  for (const auto& s : strata) weights_.push_back(1.0 / counts[s]);
  dist_ = std::discrete_distribution<Index>(weights_.begin(), weights_.end());
}

Index WeightedSampler::next() { return dist_(rng_); }

///////////////////////////////////////////
// Synthetic cohorts
///////////////////////////////////////////

namespace {

// Directions are fixed across cohorts so that differently seeded cohorts
// share one generative model.
constexpr std::uint64_t kDirectionSeed = 0x5a17c0de;

Eigen::VectorXd unit_direction(Index dim, std::mt19937_64& rng)
{
  std::normal_distribution<double> normal;
  Eigen::VectorXd u(dim);
  for (Index i = 0; i < dim; ++i) u[i] = normal(rng);
  return u.normalized();
}

std::string case_name(Index i)
{
  std::ostringstream os;
  os << "case" << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

SyntheticCohort synth_generate(const SyntheticConfig& cfg, const fs::path& out_dir)
{
  if (cfg.cases < 2) fail(ErrorKind::Config, "synth: need at least 2 cases");
  if (cfg.min_patches < 1 || cfg.max_patches < cfg.min_patches)
    fail(ErrorKind::Config, "synth: need 1 <= min_patches <= max_patches");
  if (!(cfg.censor_fraction >= 0 && cfg.censor_fraction < 1))
    fail(ErrorKind::Config, "synth: censor_fraction must be in [0, 1)");
  if (cfg.hist_dim < 1 || cfg.prot_dim < 1) fail(ErrorKind::Config, "synth: empty feature width");

  std::error_code ec;
  fs::create_directories(out_dir / "bags", ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + (out_dir / "bags").string() + ": " + ec.message());

  std::mt19937_64 dir_rng(kDirectionSeed);
  const Eigen::VectorXd u_h = cfg.hist_signal * unit_direction(cfg.hist_dim, dir_rng);
  const Eigen::VectorXd u_p = cfg.prot_signal * unit_direction(cfg.prot_dim, dir_rng);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<Index> patches(cfg.min_patches, cfg.max_patches);
  const double prot_sd = std::sqrt(cfg.prot_noise_var);

  std::vector<double> latent(static_cast<std::size_t>(cfg.cases));
  std::vector<ManifestRow> rows;
  for (Index i = 0; i < cfg.cases; ++i) {
    const std::string id = case_name(i);
    const double r = normal(rng);
    latent[static_cast<std::size_t>(i)] = r;
    const Index n = patches(rng);

    Tensor hist({n, cfg.hist_dim});
    for (Index p = 0; p < n; ++p)
      for (Index j = 0; j < cfg.hist_dim; ++j) hist(p, j) = r * u_h[j] + normal(rng);
    Tensor prot({n, cfg.prot_dim});
    for (Index p = 0; p < n; ++p)
      for (Index j = 0; j < cfg.prot_dim; ++j) prot(p, j) = r * u_p[j] + prot_sd * normal(rng);

    const fs::path hist_rel = fs::path("bags") / (id + "_hist.fbag");
    const fs::path prot_rel = fs::path("bags") / (id + "_prot.fbag");
    write_feature_bag(out_dir / hist_rel, hist, Modality::Histology);
    write_feature_bag(out_dir / prot_rel, prot, Modality::ProteinPatch);

    std::exponential_distribution<double> event(std::exp(cfg.beta * r));
    const double t = event(rng);
    rows.push_back({id, hist_rel, prot_rel, cfg.time_scale * t, 0});
  }

  // Censor an exact fraction of cases at a uniform time before their event.
  std::vector<Index> order(static_cast<std::size_t>(cfg.cases));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_censored = static_cast<std::size_t>(std::llround(cfg.censor_fraction * double(cfg.cases)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> censored(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_censored));
  std::sort(censored.begin(), censored.end());
  for (Index i : censored) {
    auto& row = rows[static_cast<std::size_t>(i)];
    double u = unit(rng);
    while (u == 0.0) u = unit(rng);
    row.time_months *= u;
    row.censor = 1;
  }

  SyntheticCohort out{out_dir / "manifest.csv", out_dir / "ground_truth.csv", 0.0};
  write_manifest(out.manifest, rows);
  {
    std::ofstream gt(out.ground_truth);
    if (!gt) fail(ErrorKind::Io, "cannot write " + out.ground_truth.string());
    gt << "case_id,r\n" << std::setprecision(17);
    for (Index i = 0; i < cfg.cases; ++i)
      gt << rows[static_cast<std::size_t>(i)].case_id << ',' << latent[static_cast<std::size_t>(i)] << '\n';
    if (!gt) fail(ErrorKind::Io, "failed writing " + out.ground_truth.string());
  }
  out.oracle_c_index = oracle_c_index(out.ground_truth, out.manifest);
  return out;
}

double oracle_c_index(const fs::path& ground_truth, const fs::path& manifest_path)
{
  if (!fs::exists(ground_truth)) fail(ErrorKind::Config, "ground truth file missing: " + ground_truth.string());
  const auto truth = read_ground_truth(ground_truth);
  std::map<std::string, double> r;
  for (const auto& [id, value] : truth) r[id] = value;
  const Manifest m = read_manifest(manifest_path, false);
  CohortPredictions preds;
  for (const auto& row : m.rows) {
    auto it = r.find(row.case_id);
    if (it == r.end()) fail(ErrorKind::Config, "no ground truth for case " + row.case_id);
    preds.push_back({row.case_id, it->second, row.time_months, row.censor});
  }
  return c_index(preds);
}

}  // namespace survmamba
