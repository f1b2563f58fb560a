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

#include "survmamba/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

namespace survmamba {

void validate_cohort(const CohortPredictions& preds)
{
  std::set<std::string> ids;
  for (const auto& p : preds) {
    if (!ids.insert(p.case_id).second) fail(ErrorKind::Domain, "duplicate case id " + p.case_id);
    if (!(p.time > 0)) fail(ErrorKind::Domain, "non-positive time for case " + p.case_id);
    if (p.censor != 0 && p.censor != 1)
      fail(ErrorKind::Domain, "censor flag must be 0 or 1 for case " + p.case_id);
  }
}

double c_index(const CohortPredictions& preds)
{
  validate_cohort(preds);
  double concordant = 0.0;
  std::size_t comparable = 0;
  for (const auto& i : preds) {
    if (i.censor != 0) continue;
    for (const auto& j : preds) {
      if (!(i.time < j.time)) continue;
      ++comparable;
      if (i.risk > j.risk)
        concordant += 1.0;
      else if (i.risk == j.risk)
        concordant += 0.5;
    }
  }
  if (comparable == 0) fail(ErrorKind::UndefinedMetric, "c_index: no comparable pairs");
  return concordant / static_cast<double>(comparable);
}

double KMCurve::at(double t) const
{
  double s = 1.0;
  for (std::size_t i = 0; i < times.size() && times[i] <= t; ++i) s = survival[i];
  return s;
}

namespace {

struct TimeSummary {
  double time;
  Index events;
  Index removed;  // events + censorings at this time
};

// Ascending distinct times with event and exit counts.
std::vector<TimeSummary> summarize(const CohortPredictions& group)
{
  std::vector<std::pair<double, int>> obs;
  obs.reserve(group.size());
  for (const auto& p : group) obs.emplace_back(p.time, p.censor);
  std::sort(obs.begin(), obs.end());
  std::vector<TimeSummary> out;
  for (std::size_t i = 0; i < obs.size();) {
    TimeSummary s{obs[i].first, 0, 0};
    for (; i < obs.size() && obs[i].first == s.time; ++i) {
      ++s.removed;
      if (obs[i].second == 0) ++s.events;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

KMCurve km_estimate(const CohortPredictions& group)
{
  if (group.empty()) fail(ErrorKind::Domain, "km_estimate: empty group");
  validate_cohort(group);
  KMCurve curve;
  Index at_risk = static_cast<Index>(group.size());
  double s = 1.0;
  for (const auto& row : summarize(group)) {
    if (row.events > 0) {
      s *= 1.0 - double(row.events) / double(at_risk);
      curve.times.push_back(row.time);
      curve.survival.push_back(s);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(row.events);
    }
    at_risk -= row.removed;
  }
  return curve;
}

void write_km_csv(const std::string& path, const KMCurve& curve)
{
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  out << "time,survival,at_risk,events\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    out << curve.times[i] << ',' << curve.survival[i] << ',' << curve.at_risk[i] << ','
        << curve.events[i] << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing " + path);
}

LogRankResult logrank_test(const CohortPredictions& group_a, const CohortPredictions& group_b)
{
  if (group_a.empty() || group_b.empty()) fail(ErrorKind::Domain, "logrank_test: empty group");
  validate_cohort(group_a);
  validate_cohort(group_b);

  std::vector<std::pair<double, int>> pooled;  // (time, group) for events only
  std::vector<double> times;
  for (const auto& p : group_a) {
    times.push_back(p.time);
    if (p.censor == 0) pooled.emplace_back(p.time, 0);
  }
  for (const auto& p : group_b) {
    times.push_back(p.time);
    if (p.censor == 0) pooled.emplace_back(p.time, 1);
  }
  if (pooled.empty()) fail(ErrorKind::UndefinedMetric, "logrank_test: no events in either group");

  std::vector<double> event_times;
  for (const auto& e : pooled) event_times.push_back(e.first);
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  auto count_at_risk = [](const CohortPredictions& g, double t) {
    return static_cast<double>(
        std::count_if(g.begin(), g.end(), [t](const Prediction& p) { return p.time >= t; }));
  };
  auto count_events = [](const CohortPredictions& g, double t) {
    return static_cast<double>(std::count_if(
        g.begin(), g.end(), [t](const Prediction& p) { return p.censor == 0 && p.time == t; }));
  };

  LogRankResult r;
  for (double t : event_times) {
    const double n_a = count_at_risk(group_a, t);
    const double n = n_a + count_at_risk(group_b, t);
    const double d_a = count_events(group_a, t);
    const double d = d_a + count_events(group_b, t);
    r.observed_a += d_a;
    r.expected_a += d * n_a / n;
    if (n > 1) r.variance += d * (n_a / n) * (1.0 - n_a / n) * (n - d) / (n - 1.0);
  }
  if (!(r.variance > 0))
    fail(ErrorKind::UndefinedMetric, "logrank_test: zero variance, groups never share a risk set");
  const double diff = r.observed_a - r.expected_a;
  r.chi_square = diff * diff / r.variance;
  r.p_value = chi_square_sf(r.chi_square, 1.0);
  return r;
}

namespace {

// Series for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x)
{
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 1000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), valid for x >= a + 1.
double gamma_q_fraction(double a, double x)
{
  constexpr double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x)
{
  if (!(a > 0) || x < 0) fail(ErrorKind::Domain, "gamma_q: need a > 0 and x >= 0");
  if (x == 0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double x, double dof)
{
  if (x < 0) fail(ErrorKind::Domain, "chi_square_sf: negative statistic");
  return gamma_q(0.5 * dof, 0.5 * x);
}

RiskGroups median_split(const CohortPredictions& preds)
{
  if (preds.size() < 2) fail(ErrorKind::Domain, "median_split: need at least two cases");
  std::vector<double> risks;
  for (const auto& p : preds) risks.push_back(p.risk);
  std::sort(risks.begin(), risks.end());
  const std::size_t n = risks.size();
  RiskGroups g;
  g.median = n % 2 ? risks[n / 2] : 0.5 * (risks[n / 2 - 1] + risks[n / 2]);
  for (const auto& p : preds) (p.risk <= g.median ? g.low : g.high).push_back(p);
  return g;
}

}  // namespace survmamba
