// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/pipeline.h"

#include <algorithm>
#include <future>
#include <map>
#include <numeric>

namespace rlvrsim {
namespace {

constexpr const char* kColocatedPool = "colocated";
constexpr const char* kRolloutPool = "rollout";
constexpr const char* kTrainPool = "train";

void Push(RunResult& run, const char* pool, Stage stage, int64_t step, double start, double end) {
  run.timeline.push_back({pool, stage, step, start, end});
}

void ClampOutputs(std::vector<WorkloadStep>& steps, int64_t cap) {
  for (auto& ws : steps) {
    for (auto& r : ws.requests) r.output_len = std::min(r.output_len, cap);
  }
}

double BusySeconds(const StepSimResult& s) {
  const auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  return sum(s.rollout_rank_busy) + sum(s.inference_rank_busy) + sum(s.train_rank_busy);
}

void ScheduleColocated(RunResult& run, const CostModel& cost) {
  double t = 0;
  for (size_t i = 0; i < run.per_step.size(); ++i) {
    const StepSimResult& s = run.per_step[i];
    const auto step = static_cast<int64_t>(i);
    Push(run, kColocatedPool, Stage::kRollout, step, t, t + s.rollout_time);
    t += s.rollout_time;
    Push(run, kColocatedPool, Stage::kInference, step, t, t + s.inference_time);
    t += s.inference_time;
    Push(run, kColocatedPool, Stage::kTrain, step, t, t + s.train_time);
    t += s.train_time;
    if (cost.t_weight_sync > 0) {
      Push(run, kColocatedPool, Stage::kWeightSync, step, t, t + cost.t_weight_sync);
      t += cost.t_weight_sync;
    }
    ++run.weight_syncs;
    // The weights are resharded in place, so rollout t + 1 uses version t.
    run.rollout_version.push_back(step);
  }
  run.e2e_time = t;
}

void ScheduleSplit(RunResult& run, const CostModel& cost, int64_t staleness) {
  const size_t n = run.per_step.size();
  std::vector<double> train_end(n, 0.0);
  double rollout_free = 0;
  double train_free = 0;
  int64_t pool_version = 0;
  size_t trained_by_start = 0;  // trains finished by the current rollout start
  for (size_t i = 0; i < n; ++i) {
    const StepSimResult& s = run.per_step[i];
    const auto t = static_cast<int64_t>(i) + 1;  // 1-based step
    const int64_t need = t - 1 - staleness;      // completed trains required
    double start = rollout_free;
    if (need > 0) start = std::max(start, train_end[static_cast<size_t>(need - 1)]);
    while (trained_by_start < i && train_end[trained_by_start] <= start) ++trained_by_start;
    const auto version = static_cast<int64_t>(trained_by_start);
    if (version > pool_version) {
      if (cost.t_weight_sync > 0) {
        Push(run, kRolloutPool, Stage::kWeightSync, t - 1, start, start + cost.t_weight_sync);
      }
      start += cost.t_weight_sync;
      pool_version = version;
      ++run.weight_syncs;
    }
    run.rollout_version.push_back(pool_version);
    const double rollout_end = start + s.rollout_time;
    Push(run, kRolloutPool, Stage::kRollout, t - 1, start, rollout_end);
    rollout_free = rollout_end;

    const double ts = std::max(rollout_end, train_free);
    Push(run, kTrainPool, Stage::kInference, t - 1, ts, ts + s.inference_time);
    const double train_start = ts + s.inference_time;
    Push(run, kTrainPool, Stage::kTrain, t - 1, train_start, train_start + s.train_time);
    train_end[i] = train_start + s.train_time;
    train_free = train_end[i];
  }
  run.e2e_time = 0;
  for (const auto& iv : run.timeline) run.e2e_time = std::max(run.e2e_time, iv.end);
}

}  // namespace

const char* ToString(RunMode mode) {
  switch (mode) {
    case RunMode::kSyncColocated: return "sync_colocated";
    case RunMode::kSyncSplit: return "sync_split";
    case RunMode::kAsyncSplit: return "async_split";
  }
  return "unknown";
}

RunMode ParseRunMode(const std::string& name) {
  if (name == "sync_colocated" || name == "colocated") return RunMode::kSyncColocated;
  if (name == "sync_split" || name == "sync" || name == "split") return RunMode::kSyncSplit;
  if (name == "async_split" || name == "async") return RunMode::kAsyncSplit;
  throw std::invalid_argument("unknown run mode '" + name + "'");
}

const char* ToString(Stage stage) {
  switch (stage) {
    case Stage::kRollout: return "rollout";
    case Stage::kWeightSync: return "weight_sync";
    case Stage::kInference: return "inference";
    case Stage::kTrain: return "train";
  }
  return "unknown";
}

void RunConfig::Validate() const {
  cluster.Validate();
  cost.Validate();
  if (max_staleness < 0) throw SimError("max_staleness must be non-negative");
  if (steps < 0) throw SimError("steps must be non-negative");
  if (mode == RunMode::kSyncColocated && !cluster.colocated) {
    throw SimError("sync_colocated requires a colocated cluster");
  }
  if (mode != RunMode::kSyncColocated && cluster.colocated) {
    throw SimError(std::string(ToString(mode)) + " requires disjoint rollout and train pools");
  }
  if (max_response_len && *max_response_len < 1) throw SimError("max_response_len must be >= 1");
}

std::vector<WorkloadStep> BuildWorkload(const Trace& source, const RunConfig& config) {
  if (config.sample) {
    SampleSpec spec = *config.sample;
    if (config.steps > 0) spec.num_steps = config.steps;
    if (config.max_response_len) spec.max_response_len = config.max_response_len;
    return SampleWorkload(source, spec).steps;
  }
  std::vector<WorkloadStep> steps = GroupByStep(source);
  if (config.steps > 0 && static_cast<size_t>(config.steps) < steps.size()) {
    steps.resize(static_cast<size_t>(config.steps));
  }
  if (config.max_response_len) ClampOutputs(steps, *config.max_response_len);
  return steps;
}

RunResult ComposeRun(std::vector<StepSimResult> per_step, const RunConfig& config) {
  config.Validate();
  RunResult run;
  run.per_step = std::move(per_step);
  switch (config.mode) {
    case RunMode::kSyncColocated: ScheduleColocated(run, config.cost); break;
    case RunMode::kSyncSplit: ScheduleSplit(run, config.cost, 0); break;
    case RunMode::kAsyncSplit: ScheduleSplit(run, config.cost, config.max_staleness); break;
  }

  double train_seconds = 0;
  double train_tokens = 0;
  double busy = 0;
  for (const auto& s : run.per_step) {
    train_seconds += s.train_time;
    train_tokens += static_cast<double>(s.train_tokens);
    busy += BusySeconds(s);
  }
  if (train_seconds > 0) run.mean_tgs = train_tokens / (config.cluster.train_ranks * train_seconds);
  if (run.e2e_time > 0) {
    run.idle_fraction_overall = std::clamp(1.0 - busy / (config.cluster.gpus() * run.e2e_time), 0.0, 1.0);
  }
  return run;
}

RunResult SimulateRun(std::span<const WorkloadStep> steps, const RunConfig& config) {
  config.Validate();
  std::vector<StepSimResult> per_step;
  per_step.reserve(steps.size());
  for (const auto& ws : steps) {
    per_step.push_back(SimulateStep(ws, config.cluster, config.cost, config.policies));
  }
  return ComposeRun(std::move(per_step), config);
}

RunResult SimulateRun(const Trace& source, const RunConfig& config) {
  config.Validate();
  const std::vector<WorkloadStep> steps = BuildWorkload(source, config);
  return SimulateRun(steps, config);
}

std::optional<std::string> ValidateTimeline(const RunResult& run, const RunConfig& config) {
  std::map<std::string, std::vector<const TimelineInterval*>> by_pool;
  for (const auto& iv : run.timeline) {
    if (iv.end < iv.start) return "interval ends before it starts";
    by_pool[iv.pool].push_back(&iv);
  }
  for (auto& [pool, ivs] : by_pool) {
    std::stable_sort(ivs.begin(), ivs.end(), [](const auto* a, const auto* b) { return a->start < b->start; });
    for (size_t i = 1; i < ivs.size(); ++i) {
      if (ivs[i]->start < ivs[i - 1]->end) {
        return "overlap on pool " + pool + " at t=" + std::to_string(ivs[i]->start);
      }
    }
  }
  if (config.mode == RunMode::kSyncColocated) return std::nullopt;

  // Version used by each rollout = trains finished when its (sync +) rollout began.
  std::vector<double> train_end;
  std::vector<double> rollout_begin(run.per_step.size(), -1.0);
  for (const auto& iv : run.timeline) {
    if (iv.stage == Stage::kTrain) train_end.push_back(iv.end);
    if (iv.pool == kRolloutPool) {
      auto& b = rollout_begin[static_cast<size_t>(iv.step)];
      b = b < 0 ? iv.start : std::min(b, iv.start);
    }
  }
  std::sort(train_end.begin(), train_end.end());
  const int64_t bound = config.mode == RunMode::kAsyncSplit ? config.max_staleness : 0;
  for (size_t i = 0; i < rollout_begin.size(); ++i) {
    const auto trained = static_cast<int64_t>(
        std::upper_bound(train_end.begin(), train_end.end(), rollout_begin[i]) - train_end.begin());
    const auto gap = static_cast<int64_t>(i) - trained;
    if (gap > bound) {
      return "rollout of step " + std::to_string(i) + " is " + std::to_string(gap) +
             " versions stale (bound " + std::to_string(bound) + ")";
    }
  }
  return std::nullopt;
}

const char* ToString(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kGpus: return "gpus";
    case SweepAxis::kBatchSize: return "batch_size";
    case SweepAxis::kMaxResponseLen: return "max_response_len";
    case SweepAxis::kStaleness: return "staleness";
  }
  return "unknown";
}

SweepAxis ParseSweepAxis(const std::string& name) {
  if (name == "gpus") return SweepAxis::kGpus;
  if (name == "batch_size" || name == "bsz") return SweepAxis::kBatchSize;
  if (name == "max_response_len") return SweepAxis::kMaxResponseLen;
  if (name == "staleness") return SweepAxis::kStaleness;
  throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

RunConfig ApplyAxis(const RunConfig& base, SweepAxis axis, int64_t value) {
  RunConfig c = base;
  switch (axis) {
    case SweepAxis::kGpus:
      if (c.cluster.colocated) {
        if (value < 1) throw SimError("gpus must be at least 1");
        c.cluster.rollout_ranks = static_cast<int>(value);
        c.cluster.train_ranks = static_cast<int>(value);
      } else {
        if (value < 2) throw SimError("split pools need at least 2 GPUs");
        c.cluster.rollout_ranks = static_cast<int>((value + 1) / 2);
        c.cluster.train_ranks = static_cast<int>(value / 2);
      }
      break;
    case SweepAxis::kBatchSize:
      if (!c.sample) throw SimError("batch_size sweeps need a sample spec");
      c.sample->batch_size = value;
      break;
    case SweepAxis::kMaxResponseLen: c.max_response_len = value; break;
    case SweepAxis::kStaleness: c.max_staleness = value; break;
  }
  return c;
}

std::vector<SweepRow> Sweep(const Trace& source, const RunConfig& base, SweepAxis axis,
                            std::span<const int64_t> values) {
  if (values.empty()) throw SimError("sweep needs at least one value");
  auto run_one = [&source, &base, axis](int64_t value) {
    SweepRow row;
    row.value = value;
    try {
      const RunConfig config = ApplyAxis(base, axis, value);
      const RunResult run = SimulateRun(source, config);
      row.steps = static_cast<int64_t>(run.per_step.size());
      row.e2e_time = run.e2e_time;
      row.mean_tgs = run.mean_tgs;
      row.idle_fraction = run.idle_fraction_overall;
      for (const auto& s : run.per_step) {
        row.mean_rollout_time += s.rollout_time;
        row.mean_train_time += s.train_time;
      }
      if (row.steps > 0) {
        row.mean_rollout_time /= static_cast<double>(row.steps);
        row.mean_train_time /= static_cast<double>(row.steps);
      }
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    return row;
  };
  std::vector<std::future<SweepRow>> futures;
  futures.reserve(values.size());
  for (int64_t v : values) futures.push_back(std::async(std::launch::async, run_one, v));
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (auto& f : futures) rows.push_back(f.get());
  return rows;
}

}  // namespace rlvrsim
