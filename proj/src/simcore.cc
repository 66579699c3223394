// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/simcore.h"

#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace rlvrsim {
namespace {

constexpr double kMsPerSecond = 1000.0;

struct Sequence {
  int64_t input = 0;
  int64_t output = 0;
  int64_t generated = 0;
  int64_t finish_iteration = 0;
  double tool_seconds = 0;
};

// Decode iterations of one rank under a KV cap; fills finish_iteration.
int64_t SimulateKv(std::vector<Sequence>& seqs, int64_t cap, VictimPolicy victim_policy,
                   int64_t& preemptions, int64_t& recomputed) {
  std::deque<size_t> waiting;
  for (size_t i = 0; i < seqs.size(); ++i) waiting.push_back(i);
  std::vector<size_t> active;  // admission order, most recent at the back
  int64_t held = 0;            // sum(input + generated) over active
  int64_t iterations = 0;

  while (!waiting.empty() || !active.empty()) {
    while (!waiting.empty()) {
      Sequence& s = seqs[waiting.front()];
      if (s.output == 0) {
        s.finish_iteration = iterations;
        waiting.pop_front();
        continue;
      }
      const auto a = static_cast<int64_t>(active.size());
      if (held + s.input + a + 1 > cap) break;
      held += s.input;
      s.generated = 0;
      active.push_back(waiting.front());
      waiting.pop_front();
    }
    if (active.empty()) {
      if (waiting.empty()) break;
      throw SimError("request cannot fit in KV capacity");
    }

    while (held + static_cast<int64_t>(active.size()) > cap) {
      if (active.size() == 1) throw SimError("request cannot fit in KV capacity");
      auto it = active.end() - 1;
      if (victim_policy == VictimPolicy::kLeastProgress) {
        // Fewest generated tokens; the most recent wins ties.
        for (auto jt = active.end() - 1;; --jt) {
          if (seqs[*jt].generated < seqs[*it].generated) it = jt;
          if (jt == active.begin()) break;
        }
      }
      Sequence& v = seqs[*it];
      held -= v.input + v.generated;
      recomputed += v.generated;
      ++preemptions;
      v.generated = 0;
      waiting.push_front(*it);
      active.erase(it);
    }

    const auto a = static_cast<int64_t>(active.size());
    int64_t jump = (cap - held) / a;
    for (size_t idx : active) jump = std::min(jump, seqs[idx].output - seqs[idx].generated);
    iterations += jump;
    held += a * jump;
    std::vector<size_t> still_active;
    still_active.reserve(active.size());
    for (size_t idx : active) {
      Sequence& s = seqs[idx];
      s.generated += jump;
      if (s.generated == s.output) {
        held -= s.input + s.output;
        s.finish_iteration = iterations;
      } else {
        still_active.push_back(idx);
      }
    }
    active = std::move(still_active);
  }
  return iterations;
}

double Compute(const TraceRecord& r, const CostModel& cost) {
  const auto len = static_cast<double>(r.input_len + r.output_len);
  return cost.t_train_per_token * len + cost.t_train_quadratic * len * len;
}

struct StageRun {
  double seconds = 0;
  std::vector<double> minibatch_seconds;
  std::vector<int64_t> minibatch_tokens;
  std::vector<double> busy;
};

// Shared by the inference and training stages: per slice, max-rank compute
// plus the collective.
StageRun RunSlices(std::span<const TraceRecord> requests, int ranks, int minibatches, const CostModel& cost,
                   BalancePolicy policy, BalanceWeight weight, double compute_scale, double comm) {
  if (ranks < 1) throw SimError("train rank count must be at least 1");
  if (minibatches < 1) throw SimError("minibatch count must be at least 1");
  StageRun run;
  run.busy.assign(static_cast<size_t>(ranks), 0.0);
  if (requests.empty()) return run;
  if (static_cast<size_t>(minibatches) > requests.size()) {
    throw SimError("minibatch count " + std::to_string(minibatches) + " exceeds the " +
                   std::to_string(requests.size()) + " requests of the step");
  }
  const size_t n = requests.size();
  const size_t m = static_cast<size_t>(minibatches);
  size_t begin = 0;
  for (size_t b = 0; b < m; ++b) {
    const size_t size = n / m + (b < n % m ? 1 : 0);
    const auto slice = requests.subspan(begin, size);
    begin += size;
    const Assignment a = Assign(slice, ranks, policy, weight);
    std::vector<double> compute(static_cast<size_t>(ranks), 0.0);
    int64_t tokens = 0;
    for (size_t i = 0; i < slice.size(); ++i) {
      compute[static_cast<size_t>(a.rank_of[i])] += compute_scale * Compute(slice[i], cost);
      tokens += slice[i].input_len + slice[i].output_len;
    }
    const double slice_time = *std::max_element(compute.begin(), compute.end()) + comm;
    for (size_t r = 0; r < compute.size(); ++r) run.busy[r] += compute[r] + comm;
    run.minibatch_seconds.push_back(slice_time);
    run.minibatch_tokens.push_back(tokens);
    run.seconds += slice_time;
  }
  return run;
}

}  // namespace

void ClusterSpec::Validate() const {
  if (rollout_ranks < 1 || train_ranks < 1) throw SimError("rank counts must be at least 1");
  if (kv_capacity_tokens && *kv_capacity_tokens < 1) throw SimError("kv_capacity_tokens must be positive");
}

void CostModel::Validate() const {
  for (double c : {t_prefill_per_token, t_decode_per_token, t_train_per_token, t_train_quadratic,
                   t_comm_per_minibatch, t_sched_per_request, t_weight_sync}) {
    if (!(c >= 0) || !std::isfinite(c)) throw SimError("cost coefficients must be finite and non-negative");
  }
}

const char* ToString(ToolMode mode) { return mode == ToolMode::kBlocking ? "blocking" : "overlapped"; }

const char* ToString(VictimPolicy policy) {
  return policy == VictimPolicy::kMostRecentlyAdmitted ? "most_recent" : "least_progress";
}

ToolMode ParseToolMode(const std::string& name) {
  if (name == "blocking") return ToolMode::kBlocking;
  if (name == "overlapped") return ToolMode::kOverlapped;
  throw std::invalid_argument("unknown tool mode '" + name + "'");
}

VictimPolicy ParseVictimPolicy(const std::string& name) {
  if (name == "most_recent") return VictimPolicy::kMostRecentlyAdmitted;
  if (name == "least_progress") return VictimPolicy::kLeastProgress;
  throw std::invalid_argument("unknown victim policy '" + name + "'");
}

RolloutRankResult RolloutTime(std::span<const TraceRecord> requests, const CostModel& cost,
                              std::optional<int64_t> kv_capacity, ToolMode tool_mode, VictimPolicy victim) {
  RolloutRankResult out;
  if (requests.empty()) return out;

  std::vector<Sequence> seqs;
  seqs.reserve(requests.size());
  double prefill_tokens = 0;
  for (const auto& r : requests) {
    if (kv_capacity && (r.input_len > *kv_capacity || r.input_len + r.output_len > *kv_capacity)) {
      throw SimError("request cannot fit: input " + std::to_string(r.input_len) + " + output " +
                     std::to_string(r.output_len) + " tokens exceed KV capacity " +
                     std::to_string(*kv_capacity));
    }
    Sequence s;
    s.input = r.input_len;
    s.output = r.output_len;
    s.finish_iteration = r.output_len;
    s.tool_seconds = r.total_tool_latency_ms() / kMsPerSecond;
    prefill_tokens += static_cast<double>(r.input_len);
    seqs.push_back(s);
  }

  if (kv_capacity) {
    out.decode_iterations = SimulateKv(seqs, *kv_capacity, victim, out.preemption_events, out.recomputed_tokens);
  } else {
    for (const auto& s : seqs) out.decode_iterations = std::max(out.decode_iterations, s.output);
  }

  const double decode = static_cast<double>(out.decode_iterations) * cost.t_decode_per_token;
  if (tool_mode == ToolMode::kBlocking) {
    for (const auto& s : seqs) out.tool_seconds += s.tool_seconds;
  } else {
    double critical = decode;
    for (const auto& s : seqs) {
      critical = std::max(critical, static_cast<double>(s.finish_iteration) * cost.t_decode_per_token + s.tool_seconds);
    }
    out.tool_seconds = critical - decode;
  }
  out.seconds = prefill_tokens * cost.t_prefill_per_token + decode +
                static_cast<double>(requests.size()) * cost.t_sched_per_request + out.tool_seconds;
  return out;
}

TrainResult TrainTime(std::span<const TraceRecord> requests, int train_ranks, int minibatches,
                      const CostModel& cost, BalancePolicy policy, BalanceWeight weight) {
  StageRun run = RunSlices(requests, train_ranks, minibatches, cost, policy, weight, 1.0,
                           cost.t_comm_per_minibatch);
  TrainResult out;
  out.seconds = run.seconds;
  for (size_t b = 0; b < run.minibatch_seconds.size(); ++b) {
    const double t = run.minibatch_seconds[b];
    out.per_minibatch_tgs.push_back(
        t > 0 ? static_cast<double>(run.minibatch_tokens[b]) / (train_ranks * t) : 0.0);
  }
  out.minibatch_seconds = std::move(run.minibatch_seconds);
  out.minibatch_tokens = std::move(run.minibatch_tokens);
  out.per_rank_busy = std::move(run.busy);
  return out;
}

double IdleFraction(std::span<const double> busy, double stage_time) {
  if (busy.empty() || !(stage_time > 0)) return 0.0;
  const double total = std::accumulate(busy.begin(), busy.end(), 0.0);
  return std::clamp(1.0 - total / (static_cast<double>(busy.size()) * stage_time), 0.0, 1.0);
}

StepSimResult SimulateStep(const WorkloadStep& step, const ClusterSpec& cluster, const CostModel& cost,
                           const SimPolicies& policies) {
  cluster.Validate();
  cost.Validate();
  if (!(policies.inference_factor >= 0)) throw SimError("inference_factor must be non-negative");

  StepSimResult res;
  res.step = step.step;
  const std::span<const TraceRecord> requests = step.requests;
  for (const auto& r : requests) res.tokens += r.input_len + r.output_len;

  // Rollout: balance, then each rank decodes its share concurrently.
  const Assignment rollout =
      Assign(requests, cluster.rollout_ranks, policies.rollout_policy, policies.rollout_weight);
  res.rollout_rank_busy.assign(static_cast<size_t>(cluster.rollout_ranks), 0.0);
  for (int rank = 0; rank < cluster.rollout_ranks; ++rank) {
    std::vector<TraceRecord> mine;
    for (size_t i : rollout.RequestsOf(rank)) mine.push_back(requests[i]);
    const RolloutRankResult rr =
        RolloutTime(mine, cost, cluster.kv_capacity_tokens, policies.tool_mode, policies.victim);
    res.rollout_rank_busy[static_cast<size_t>(rank)] = rr.seconds;
    res.preemption_events += rr.preemption_events;
    res.recomputed_tokens += rr.recomputed_tokens;
    if (rr.seconds > res.rollout_time) {
      res.rollout_time = rr.seconds;
      res.tool_time = rr.tool_seconds;
    }
  }
  res.rollout_idle_fraction = IdleFraction(res.rollout_rank_busy, res.rollout_time);
  if (res.rollout_time > 0) {
    res.rollout_tgs = static_cast<double>(res.tokens) / (cluster.rollout_ranks * res.rollout_time);
  }

  std::vector<TraceRecord> kept;
  std::span<const TraceRecord> train_set = requests;
  if (policies.drop_filtered_for_training) {
    kept = Unfiltered(requests);
    train_set = kept;
  }
  for (const auto& r : train_set) res.train_tokens += r.input_len + r.output_len;

  // Inference: forward passes only, no collective, scaled.
  StageRun inference = RunSlices(train_set, cluster.train_ranks, policies.minibatches, cost,
                                 policies.train_policy, policies.train_weight, policies.inference_factor, 0.0);
  res.inference_time = inference.seconds;
  res.inference_rank_busy = std::move(inference.busy);
  res.inference_idle_fraction = IdleFraction(res.inference_rank_busy, res.inference_time);

  TrainResult train = TrainTime(train_set, cluster.train_ranks, policies.minibatches, cost,
                                policies.train_policy, policies.train_weight);
  res.train_time = train.seconds;
  res.train_rank_busy = std::move(train.per_rank_busy);
  res.per_minibatch_tgs = std::move(train.per_minibatch_tgs);
  res.train_idle_fraction = IdleFraction(res.train_rank_busy, res.train_time);
  if (res.train_time > 0) {
    res.train_tgs = static_cast<double>(res.train_tokens) / (cluster.train_ranks * res.train_time);
  }

  res.total_time = res.rollout_time + res.inference_time + res.train_time + cost.t_weight_sync;

  const auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  const double capacity = cluster.rollout_ranks * res.rollout_time +
                          cluster.train_ranks * (res.inference_time + res.train_time);
  if (capacity > 0) {
    const double busy = sum(res.rollout_rank_busy) + sum(res.inference_rank_busy) + sum(res.train_rank_busy);
    res.idle_fraction = std::clamp(1.0 - busy / capacity, 0.0, 1.0);
  }
  return res;
}

}  // namespace rlvrsim
