// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/stats.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace rlvrsim {
namespace {

double Mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double PopulationStd(std::span<const double> v, double mean) {
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

std::vector<double> Histogram(std::span<const double> values, double lo, double hi, int bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  const double width = hi - lo;
  for (double x : values) {
    size_t b = 0;
    if (width > 0) {
      b = static_cast<size_t>(std::floor((x - lo) * bins / width));
      b = std::min(b, static_cast<size_t>(bins - 1));
    }
    h[b] += 1.0;
  }
  return h;
}

}  // namespace

const char* ToString(LengthKind kind) {
  switch (kind) {
    case LengthKind::kInput: return "input";
    case LengthKind::kOutput: return "output";
    case LengthKind::kTurns: return "turns";
    case LengthKind::kToolLatency: return "tool_latency";
  }
  return "unknown";
}

LengthKind ParseLengthKind(const std::string& name) {
  if (name == "input") return LengthKind::kInput;
  if (name == "output") return LengthKind::kOutput;
  if (name == "turns") return LengthKind::kTurns;
  if (name == "tool_latency") return LengthKind::kToolLatency;
  throw std::invalid_argument("unknown length kind '" + name + "'");
}

LengthDistribution ExtractLengths(std::span<const TraceRecord> records, LengthKind kind,
                                  FilterMode filter) {
  LengthDistribution dist;
  dist.kind = kind;
  dist.values.reserve(records.size());
  for (const auto& r : records) {
    if (filter == FilterMode::kExcludeFiltered && r.filtered) continue;
    switch (kind) {
      case LengthKind::kInput: dist.values.push_back(static_cast<double>(r.input_len)); break;
      case LengthKind::kOutput: dist.values.push_back(static_cast<double>(r.output_len)); break;
      case LengthKind::kTurns:
        if (r.turn_count) dist.values.push_back(static_cast<double>(*r.turn_count));
        break;
      case LengthKind::kToolLatency:
        if (r.tool_latencies_ms) {
          dist.values.insert(dist.values.end(), r.tool_latencies_ms->begin(), r.tool_latencies_ms->end());
        }
        break;
    }
  }
  return dist;
}

double PercentileSorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw StatsError("percentile of an empty distribution");
  if (!(q >= 0.0 && q <= 1.0)) throw StatsError("percentile rank must lie in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double Percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return PercentileSorted(values, q);
}

SummaryStats Summary(const LengthDistribution& dist) {
  if (dist.values.empty()) throw StatsError("summary of an empty distribution");
  std::vector<double> sorted = dist.values;
  std::sort(sorted.begin(), sorted.end());
  SummaryStats s;
  s.count = static_cast<int64_t>(sorted.size());
  s.mean = Mean(sorted);
  s.stddev = PopulationStd(sorted, s.mean);
  s.min = sorted.front();
  s.max = sorted.back();
  s.p50 = PercentileSorted(sorted, 0.50);
  s.p90 = PercentileSorted(sorted, 0.90);
  s.p95 = PercentileSorted(sorted, 0.95);
  s.p99 = PercentileSorted(sorted, 0.99);
  return s;
}

std::vector<CdfPoint> EmpiricalCdf(const LengthDistribution& dist) {
  if (dist.values.empty()) throw StatsError("CDF of an empty distribution");
  std::vector<double> sorted = dist.values;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<CdfPoint> cdf;
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    cdf.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }
  return cdf;
}

double JensenShannonDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw StatsError("JSD of histograms with different bin counts");
  const double sp = std::accumulate(p.begin(), p.end(), 0.0);
  const double sq = std::accumulate(q.begin(), q.end(), 0.0);
  if (!(sp > 0) || !(sq > 0)) throw StatsError("JSD of an empty histogram");
  double jp = 0;
  double jq = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] / sp;
    const double qi = q[i] / sq;
    const double mi = 0.5 * (pi + qi);
    if (pi > 0) jp += p[i] * std::log2(pi / mi);
    if (qi > 0) jq += q[i] * std::log2(qi / mi);
  }
  return std::clamp(0.5 * (jp / sp + jq / sq), 0.0, 1.0);
}

StepSimilarityMatrix StepSimilarity(const Trace& trace, LengthKind kind, int bins, FilterMode filter) {
  if (bins < 1) throw StatsError("similarity needs at least one bin");
  StepSimilarityMatrix out;
  std::vector<std::vector<double>> per_step;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& ws : GroupByStep(trace)) {
    LengthDistribution d = ExtractLengths(ws.requests, kind, filter);
    if (d.values.empty()) {
      out.skipped_steps.push_back(ws.step);
      continue;
    }
    const auto [mn, mx] = std::minmax_element(d.values.begin(), d.values.end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
    out.steps.push_back(ws.step);
    per_step.push_back(std::move(d.values));
  }
  const size_t n = out.steps.size();
  std::vector<std::vector<double>> hist;
  hist.reserve(n);
  for (const auto& v : per_step) hist.push_back(Histogram(v, lo, hi, bins));
  out.sim.assign(n * n, 1.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double s = 1.0 - JensenShannonDivergence(hist[i], hist[j]);
      out.sim[i * n + j] = s;
      out.sim[j * n + i] = s;
    }
  }
  return out;
}

std::vector<PromptGroupStats> PromptGroups(std::span<const TraceRecord> records) {
  const bool any_prompt = std::any_of(records.begin(), records.end(),
                                      [](const TraceRecord& r) { return r.prompt_id.has_value(); });
  if (!any_prompt) throw StatsError("trace lacks prompt grouping");
  std::vector<PromptGroupStats> groups;
  std::unordered_map<std::string, size_t> index;
  for (const auto& r : records) {
    if (!r.prompt_id) continue;
    auto [it, inserted] = index.try_emplace(*r.prompt_id, groups.size());
    if (inserted) {
      PromptGroupStats g;
      g.prompt_id = *r.prompt_id;
      groups.push_back(std::move(g));
    }
    if (!r.filtered) groups[it->second].sample_lengths.push_back(static_cast<double>(r.output_len));
  }
  for (auto& g : groups) {
    g.undersampled = g.sample_lengths.size() < 2;
    if (g.sample_lengths.empty()) continue;
    g.mean = Mean(g.sample_lengths);
    g.stddev = g.undersampled ? 0.0 : PopulationStd(g.sample_lengths, g.mean);
    if (g.mean > 0) g.coefficient_of_variation = g.stddev / g.mean;
  }
  return groups;
}

PromptClustering SummarizePromptGroups(std::span<const PromptGroupStats> groups) {
  PromptClustering out;
  std::vector<double> within;
  std::vector<double> means;
  for (const auto& g : groups) {
    if (g.sample_lengths.empty()) continue;
    means.push_back(g.mean);
    if (!g.undersampled && g.coefficient_of_variation) within.push_back(*g.coefficient_of_variation);
  }
  out.groups = static_cast<int64_t>(means.size());
  if (!within.empty()) out.median_within_cv = Percentile(within, 0.5);
  if (!means.empty()) {
    const double m = Mean(means);
    if (m > 0) out.between_cv = PopulationStd(means, m) / m;
  }
  return out;
}

std::vector<StepSummary> TemporalTrend(const Trace& trace, LengthKind kind, FilterMode filter) {
  std::vector<StepSummary> out;
  for (const auto& ws : GroupByStep(trace)) {
    LengthDistribution d = ExtractLengths(ws.requests, kind, filter);
    if (d.values.empty()) continue;
    out.push_back({ws.step, Summary(d)});
  }
  return out;
}

std::optional<double> PearsonCorrelation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw StatsError("correlation of sequences with different lengths");
  if (x.size() < 2) return std::nullopt;
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
  if (*xmin == *xmax || *ymin == *ymax) return std::nullopt;
  const double mx = Mean(x);
  const double my = Mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> JointCorrelation(std::span<const TraceRecord> records, CorrelationScale scale) {
  std::vector<double> x, y;
  x.reserve(records.size());
  y.reserve(records.size());
  for (const auto& r : records) {
    double in = static_cast<double>(r.input_len);
    double out = static_cast<double>(r.output_len);
    if (scale == CorrelationScale::kLog1p) {
      in = std::log1p(in);
      out = std::log1p(out);
    }
    x.push_back(in);
    y.push_back(out);
  }
  return PearsonCorrelation(x, y);
}

}  // namespace rlvrsim
