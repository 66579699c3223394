// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvrsim/generator.h"
#include "rlvrsim/simcore.h"
#include "rlvrsim/trace.h"

namespace rlvrsim {

enum class RunMode { kSyncColocated, kSyncSplit, kAsyncSplit };

const char* ToString(RunMode mode);
/// Accepts sync_colocated, sync_split, async_split and the shorthands
/// colocated, sync, split, async.
RunMode ParseRunMode(const std::string& name);

struct RunConfig {
  RunMode mode = RunMode::kSyncColocated;
  /// Largest allowed gap between the trained version a rollout uses and the
  /// version its batch is trained on; async_split only.
  int64_t max_staleness = 0;
  /// Number of steps to run; 0 runs every workload step.
  int64_t steps = 0;
  ClusterSpec cluster;
  CostModel cost;
  SimPolicies policies;
  /// When set, the workload is drawn by the generator instead of replayed.
  std::optional<SampleSpec> sample;
  std::optional<int64_t> max_response_len;

  void Validate() const;
};

enum class Stage { kRollout, kWeightSync, kInference, kTrain };
const char* ToString(Stage stage);

struct TimelineInterval {
  std::string pool;  // "colocated", "rollout" or "train"
  Stage stage = Stage::kRollout;
  int64_t step = 0;  // index into the run, 0-based
  double start = 0;
  double end = 0;
};

struct RunResult {
  std::vector<StepSimResult> per_step;
  double e2e_time = 0;
  /// Trained tokens / (train ranks * total train time).
  double mean_tgs = 0;
  /// 1 - busy GPU-seconds / (GPUs * e2e).
  double idle_fraction_overall = 0;
  std::vector<TimelineInterval> timeline;
  /// Trained version each rollout generated with.
  std::vector<int64_t> rollout_version;
  int64_t weight_syncs = 0;
};

/// Workload steps for a run: generated when config.sample is set, otherwise
/// the trace grouped by step, truncated to config.steps and clamped to
/// config.max_response_len.
std::vector<WorkloadStep> BuildWorkload(const Trace& source, const RunConfig& config);

/// Earliest-start schedule of precomputed step results.
///
/// sync_colocated: rollout, inference, train and weight sync of each step
/// serialize on one pool. Split modes: rollout t (1-based) starts once the
/// rollout pool is free and at least t - 1 - S train steps have finished
/// (S = 0 for sync_split); if a newer version exists at that moment the
/// rollout pool first spends t_weight_sync adopting it. Inference and train
/// of step t run on the train pool after rollout t and train t - 1.
RunResult ComposeRun(std::vector<StepSimResult> per_step, const RunConfig& config);

RunResult SimulateRun(std::span<const WorkloadStep> steps, const RunConfig& config);
RunResult SimulateRun(const Trace& source, const RunConfig& config);

/// Checks pool exclusivity and the staleness bound against a timeline;
/// returns a description of the first violation.
std::optional<std::string> ValidateTimeline(const RunResult& run, const RunConfig& config);

enum class SweepAxis { kGpus, kBatchSize, kMaxResponseLen, kStaleness };
const char* ToString(SweepAxis axis);
SweepAxis ParseSweepAxis(const std::string& name);

struct SweepRow {
  int64_t value = 0;
  bool ok = true;
  std::string error;
  int64_t steps = 0;
  double e2e_time = 0;
  double mean_tgs = 0;
  double idle_fraction = 0;
  double mean_rollout_time = 0;
  double mean_train_time = 0;
};

/// Applies one axis value to a copy of `base` and runs it. gpus: colocated
/// pools use value ranks each; split pools halve it (rollout gets the odd
/// GPU). Failed runs are reported in their row; the sweep continues.
RunConfig ApplyAxis(const RunConfig& base, SweepAxis axis, int64_t value);
std::vector<SweepRow> Sweep(const Trace& source, const RunConfig& base, SweepAxis axis,
                            std::span<const int64_t> values);

}  // namespace rlvrsim
