// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlvrsim/balancer.h"
#include "rlvrsim/trace.h"

namespace rlvrsim {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClusterSpec {
  int rollout_ranks = 1;
  int train_ranks = 1;
  /// Rollout and training time-share the same GPUs; otherwise disjoint pools.
  bool colocated = true;
  /// Per rollout rank; unlimited when absent.
  std::optional<int64_t> kv_capacity_tokens;

  int gpus() const { return colocated ? std::max(rollout_ranks, train_ranks) : rollout_ranks + train_ranks; }
  void Validate() const;
};

/// Linear token-cost coefficients. Units: seconds per token unless noted.
struct CostModel {
  double t_prefill_per_token = 0;
  double t_decode_per_token = 0;   // seconds per decode iteration of a rank
  double t_train_per_token = 0;
  double t_train_quadratic = 0;    // seconds per token^2
  double t_comm_per_minibatch = 0; // seconds
  double t_sched_per_request = 0;  // seconds
  double t_weight_sync = 0;        // seconds per version adoption

  void Validate() const;
};

enum class ToolMode { kBlocking, kOverlapped };
enum class VictimPolicy { kMostRecentlyAdmitted, kLeastProgress };

const char* ToString(ToolMode mode);
const char* ToString(VictimPolicy policy);
ToolMode ParseToolMode(const std::string& name);
VictimPolicy ParseVictimPolicy(const std::string& name);

struct SimPolicies {
  BalancePolicy rollout_policy = BalancePolicy::kFcfsRoundRobin;
  BalanceWeight rollout_weight = BalanceWeight::kOutputTokens;
  BalancePolicy train_policy = BalancePolicy::kLptGreedy;
  BalanceWeight train_weight = BalanceWeight::kTotalTokens;
  ToolMode tool_mode = ToolMode::kBlocking;
  VictimPolicy victim = VictimPolicy::kMostRecentlyAdmitted;
  double inference_factor = 0.33;
  int minibatches = 1;
  /// Filtered samples take part in rollout but not in inference/training.
  bool drop_filtered_for_training = false;
};

struct RolloutRankResult {
  double seconds = 0;
  int64_t preemption_events = 0;
  int64_t recomputed_tokens = 0;
  int64_t decode_iterations = 0;
  /// Tool latency that lands on this rank's critical path.
  double tool_seconds = 0;
};

/// One rollout rank under continuous batching: every admitted sequence
/// decodes one token per iteration, so decode time follows the longest
/// output. Time = prefill of all inputs + iterations * t_decode + per-request
/// scheduling + tool time (blocking: the sum of all calls; overlapped: only
/// the part of any request's decode+tools path beyond the decode span).
///
/// With a KV capacity, a decode iteration needs sum(input + generated + 1)
/// over active sequences to fit; otherwise the victim is evicted, its
/// generated tokens are recomputed after re-admission, and one preemption is
/// counted. Requests are admitted in the given order.
RolloutRankResult RolloutTime(std::span<const TraceRecord> requests, const CostModel& cost,
                              std::optional<int64_t> kv_capacity = std::nullopt,
                              ToolMode tool_mode = ToolMode::kBlocking,
                              VictimPolicy victim = VictimPolicy::kMostRecentlyAdmitted);

struct TrainResult {
  double seconds = 0;
  std::vector<double> minibatch_seconds;
  std::vector<int64_t> minibatch_tokens;
  std::vector<double> per_minibatch_tgs;
  std::vector<double> per_rank_busy;
};

/// Splits requests into `minibatches` contiguous slices (sizes differ by at
/// most one), balances each slice over the ranks, and charges
/// max-rank compute + t_comm per slice. Busy time counts compute plus the
/// collective.
TrainResult TrainTime(std::span<const TraceRecord> requests, int train_ranks, int minibatches,
                      const CostModel& cost, BalancePolicy policy = BalancePolicy::kLptGreedy,
                      BalanceWeight weight = BalanceWeight::kTotalTokens);

struct StepSimResult {
  int64_t step = 0;
  double rollout_time = 0;
  double inference_time = 0;
  double train_time = 0;
  double tool_time = 0;
  /// rollout + inference + train + t_weight_sync.
  double total_time = 0;

  std::vector<double> rollout_rank_busy;
  std::vector<double> inference_rank_busy;
  std::vector<double> train_rank_busy;
  double rollout_idle_fraction = 0;
  double inference_idle_fraction = 0;
  double train_idle_fraction = 0;
  /// Over all three stages, weighted by rank-seconds.
  double idle_fraction = 0;

  std::vector<double> per_minibatch_tgs;
  double rollout_tgs = 0;
  double train_tgs = 0;
  int64_t tokens = 0;        // all requests, input + output
  int64_t train_tokens = 0;  // requests reaching training
  int64_t preemption_events = 0;
  int64_t recomputed_tokens = 0;
};

/// 1 - sum(busy) / (ranks * stage_time); 0 for an empty stage.
double IdleFraction(std::span<const double> busy, double stage_time);

StepSimResult SimulateStep(const WorkloadStep& step, const ClusterSpec& cluster, const CostModel& cost,
                           const SimPolicies& policies);

}  // namespace rlvrsim
