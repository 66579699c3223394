// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rlvrsim/balancer.h"
#include "rlvrsim/generator.h"
#include "rlvrsim/pipeline.h"
#include "rlvrsim/stats.h"

namespace rlvrsim {

using Json = nlohmann::json;

/// Tool version, command, seed and config digest. No timestamps, so repeated
/// runs emit identical bytes.
struct ReportMetadata {
  std::string command;
  uint64_t seed = 0;
  std::string config_digest;
};

Json ToJson(const ReportMetadata& meta);
Json ToJson(const SummaryStats& s);
Json ToJson(const Assignment& a);
Json ToJson(const StepSimResult& s);
/// Run summary without the timeline.
Json ToJson(const RunResult& run, const RunConfig& config);
Json TimelineJson(const RunResult& run);
Json ToJson(const GeneratedWorkload& w, const SampleSpec& spec);
Json ToJson(std::span<const SweepRow> rows, SweepAxis axis);

/// Shortest round-trip decimal.
std::string FormatNumber(double v);

/// pool,stage,step,start,end
void WriteTimelineCsv(const RunResult& run, std::ostream& out);
/// step,rollout_s,inference_s,train_s,tool_s,idle_frac,tgs
void WriteStepsCsv(const RunResult& run, std::ostream& out);
void WriteSweepCsv(std::span<const SweepRow> rows, SweepAxis axis, std::ostream& out);

struct AnalyzeOptions {
  std::optional<TaskType> task;
  int bins = kDefaultSimilarityBins;
  FilterMode filter = FilterMode::kIncludeFiltered;
};

/// Writes summary.json, cdf.csv, similarity.csv, trends.csv and, when the
/// trace carries prompt_id, prompt_groups.csv into `dir`. Returns the file
/// names written.
std::vector<std::string> WriteAnalyzeReport(const Trace& trace, const AnalyzeOptions& options,
                                            const ReportMetadata& meta, const std::filesystem::path& dir);

/// Writes `text` to `path`, throwing std::runtime_error naming the path on failure.
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

}  // namespace rlvrsim
