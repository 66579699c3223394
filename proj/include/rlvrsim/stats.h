// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlvrsim/trace.h"

namespace rlvrsim {

enum class LengthKind { kInput, kOutput, kTurns, kToolLatency };

const char* ToString(LengthKind kind);
LengthKind ParseLengthKind(const std::string& name);

/// Thrown for statistics that are undefined on the given data.
class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LengthDistribution {
  std::vector<double> values;
  LengthKind kind = LengthKind::kOutput;
};

/// Selects which records feed a statistic.
enum class FilterMode { kIncludeFiltered, kExcludeFiltered };

/// Values of `kind` for each record; records lacking the field are skipped
/// (turn_count absent, tool_latencies absent). kToolLatency flattens every
/// call of every record.
LengthDistribution ExtractLengths(std::span<const TraceRecord> records, LengthKind kind,
                                  FilterMode filter = FilterMode::kIncludeFiltered);

struct SummaryStats {
  int64_t count = 0;
  double mean = 0;
  double stddev = 0;  // population
  double min = 0;
  double p50 = 0;
  double p90 = 0;
  double p95 = 0;
  double p99 = 0;
  double max = 0;

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

/// Percentile of ascending `sorted` by linear interpolation between closest
/// ranks: position q * (n - 1), zero-indexed. q in [0, 1].
double PercentileSorted(std::span<const double> sorted, double q);
double Percentile(std::vector<double> values, double q);

SummaryStats Summary(const LengthDistribution& dist);

struct CdfPoint {
  double value = 0;
  double cumulative_fraction = 0;

  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// One point per distinct value, ascending; the last fraction is 1.
std::vector<CdfPoint> EmpiricalCdf(const LengthDistribution& dist);

/// Base-2 Jensen-Shannon divergence of two histograms (normalized
/// internally); 0 * log 0 := 0. Result in [0, 1].
double JensenShannonDivergence(std::span<const double> p, std::span<const double> q);

struct StepSimilarityMatrix {
  std::vector<int64_t> steps;
  /// Row-major, steps.size() squared; sim = 1 - JSD.
  std::vector<double> sim;
  /// Steps with no records left after filtering.
  std::vector<int64_t> skipped_steps;

  size_t size() const { return steps.size(); }
  double operator()(size_t i, size_t j) const { return sim[i * steps.size() + j]; }
};

inline constexpr int kDefaultSimilarityBins = 100;

/// Equal-width histograms over the global [min, max] across included steps.
StepSimilarityMatrix StepSimilarity(const Trace& trace, LengthKind kind,
                                    int bins = kDefaultSimilarityBins,
                                    FilterMode filter = FilterMode::kIncludeFiltered);

struct PromptGroupStats {
  std::string prompt_id;
  std::vector<double> sample_lengths;
  double mean = 0;
  double stddev = 0;
  /// std / mean; absent when mean == 0.
  std::optional<double> coefficient_of_variation;
  /// Fewer than two surviving samples.
  bool undersampled = false;
};

/// One entry per prompt in first-appearance order. Filtered samples and
/// records without prompt_id are excluded.
std::vector<PromptGroupStats> PromptGroups(std::span<const TraceRecord> records);
inline std::vector<PromptGroupStats> PromptGroups(const WorkloadStep& step) {
  return PromptGroups(step.requests);
}

struct PromptClustering {
  /// Median within-prompt coefficient of variation over groups with >= 2 samples.
  double median_within_cv = 0;
  /// Coefficient of variation of the group means.
  double between_cv = 0;
  int64_t groups = 0;
};

PromptClustering SummarizePromptGroups(std::span<const PromptGroupStats> groups);

struct StepSummary {
  int64_t step = 0;
  SummaryStats stats;
};

/// One entry per step (ascending) that has at least one value of `kind`.
std::vector<StepSummary> TemporalTrend(const Trace& trace, LengthKind kind,
                                       FilterMode filter = FilterMode::kIncludeFiltered);

enum class CorrelationScale { kRaw, kLog1p };

/// Pearson correlation of (input_len, output_len); absent for fewer than two
/// points or zero variance in either coordinate.
std::optional<double> JointCorrelation(std::span<const TraceRecord> records,
                                       CorrelationScale scale = CorrelationScale::kRaw);
std::optional<double> PearsonCorrelation(std::span<const double> x, std::span<const double> y);

}  // namespace rlvrsim
