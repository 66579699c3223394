// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/simcore.h"

#include <gtest/gtest.h>

#include <numeric>

#include "support.h"

namespace rlvrsim {
namespace {

using testing::Req;

CostModel DecodeOnly() {
  CostModel c;
  c.t_decode_per_token = 1.0;
  return c;
}

std::vector<TraceRecord> Outputs(const std::vector<int64_t>& w) {
  std::vector<TraceRecord> rs;
  for (int64_t x : w) rs.push_back(Req(0, x));
  return rs;
}

TEST(Rollout, ConcurrentDecodeFollowsLongest) {
  const auto r = RolloutTime(Outputs({10, 2}), DecodeOnly());
  EXPECT_EQ(r.seconds, 10.0);
  EXPECT_EQ(r.decode_iterations, 10);
}

TEST(Rollout, EmptyRank) {
  const auto r = RolloutTime({}, DecodeOnly(), 100);
  EXPECT_EQ(r.seconds, 0.0);
  EXPECT_EQ(r.preemption_events, 0);
}

TEST(Rollout, FullFormula) {
  CostModel c;
  c.t_prefill_per_token = 0.5;
  c.t_decode_per_token = 2;
  c.t_sched_per_request = 0.25;
  std::vector<TraceRecord> rs = {Req(4, 3), Req(6, 7)};
  rs[0].tool_latencies_ms = std::vector<double>{1000, 500};
  EXPECT_DOUBLE_EQ(RolloutTime(rs, c).seconds, 10 * 0.5 + 7 * 2 + 2 * 0.25 + 1.5);
}

TEST(Rollout, OverlappedToolsHideBehindDecode) {
  std::vector<TraceRecord> rs = {Req(0, 2), Req(0, 10)};
  rs[0].tool_latencies_ms = std::vector<double>{5000};  // ends at 2 + 5 = 7 < 10
  const auto hidden = RolloutTime(rs, DecodeOnly(), std::nullopt, ToolMode::kOverlapped);
  EXPECT_DOUBLE_EQ(hidden.seconds, 10);
  EXPECT_DOUBLE_EQ(hidden.tool_seconds, 0);
  rs[0].tool_latencies_ms = std::vector<double>{12000};  // ends at 14
  const auto exposed = RolloutTime(rs, DecodeOnly(), std::nullopt, ToolMode::kOverlapped);
  EXPECT_DOUBLE_EQ(exposed.seconds, 14);
  EXPECT_DOUBLE_EQ(exposed.tool_seconds, 4);
  EXPECT_DOUBLE_EQ(RolloutTime(rs, DecodeOnly()).seconds, 22);
}

TEST(Rollout, KvPressureForcesPreemption) {
  const std::vector<TraceRecord> rs = {Req(10, 50), Req(10, 50)};
  const auto capped = RolloutTime(rs, DecodeOnly(), 100);
  EXPECT_GE(capped.preemption_events, 1);
  EXPECT_GT(capped.recomputed_tokens, 0);
  EXPECT_GT(capped.seconds, 50.0);
  EXPECT_GT(capped.seconds, RolloutTime(rs, DecodeOnly()).seconds);
}

TEST(Rollout, KvHandTrace) {
  // Both admitted (held 20); 40 iterations fill the cache to 100; the next
  // iteration needs 102, so the most recent sequence (40 generated) is
  // evicted. The first finishes 10 iterations later, the second restarts at
  // iteration 50 and needs 50 more: 100 iterations.
  const auto r = RolloutTime(std::vector<TraceRecord>{Req(10, 50), Req(10, 50)}, DecodeOnly(), 100);
  EXPECT_EQ(r.preemption_events, 1);
  EXPECT_EQ(r.recomputed_tokens, 40);
  EXPECT_EQ(r.decode_iterations, 100);
}

TEST(Rollout, LeastProgressVictim) {
  // Equal progress at the first eviction, so both policies pick the newest.
  const std::vector<TraceRecord> rs = {Req(60, 30), Req(5, 30)};
  const auto mr = RolloutTime(rs, DecodeOnly(), 100, ToolMode::kBlocking, VictimPolicy::kMostRecentlyAdmitted);
  const auto lp = RolloutTime(rs, DecodeOnly(), 100, ToolMode::kBlocking, VictimPolicy::kLeastProgress);
  EXPECT_GE(mr.preemption_events, 1);
  EXPECT_EQ(lp.preemption_events, mr.preemption_events);
  EXPECT_EQ(lp.decode_iterations, mr.decode_iterations);
}

TEST(Rollout, RequestThatCannotFit) {
  EXPECT_THROW(RolloutTime(std::vector<TraceRecord>{Req(200, 1)}, DecodeOnly(), 100), SimError);
  EXPECT_THROW(RolloutTime(std::vector<TraceRecord>{Req(60, 60)}, DecodeOnly(), 100), SimError);
}

TEST(Rollout, HugeCapMatchesFormula) {
  testing::Gen g(31);
  CostModel c;
  c.t_prefill_per_token = 1e-4;
  c.t_decode_per_token = 0.01;
  c.t_sched_per_request = 0.002;
  for (int t = 0; t < 100; ++t) {
    std::vector<TraceRecord> rs;
    for (int64_t i = g.Int(1, 40); i > 0; --i) rs.push_back(Req(g.Int(0, 2000), g.Int(0, 5000)));
    const auto a = RolloutTime(rs, c);
    const auto b = RolloutTime(rs, c, int64_t{1} << 40);
    EXPECT_EQ(a.decode_iterations, b.decode_iterations);
    EXPECT_DOUBLE_EQ(a.seconds, b.seconds);
    EXPECT_EQ(b.preemption_events, 0);
  }
}

TEST(Train, BalancedTwoRanks) {
  CostModel c;
  c.t_train_per_token = 0.01;
  const auto r = TrainTime(Outputs({300, 100, 200, 200}), 2, 1, c);
  EXPECT_DOUBLE_EQ(r.seconds, 0.01 * 400);
  ASSERT_EQ(r.per_minibatch_tgs.size(), 1u);
  EXPECT_DOUBLE_EQ(r.per_minibatch_tgs[0], 1 / 0.01);
}

TEST(Train, ZeroLengthsOnlyCommunicate) {
  CostModel c;
  c.t_comm_per_minibatch = 2.5;
  const auto r = TrainTime(Outputs({0, 0, 0, 0, 0}), 2, 3, c);
  EXPECT_DOUBLE_EQ(r.seconds, 7.5);
  for (double tgs : r.per_minibatch_tgs) EXPECT_EQ(tgs, 0.0);
}

TEST(Train, CommunicationAmortization) {
  CostModel c;
  c.t_train_per_token = 1e-4;
  c.t_comm_per_minibatch = 1.0;
  const auto short_mb = TrainTime(Outputs({50, 60, 40, 50}), 2, 1, c);
  const auto long_mb = TrainTime(Outputs({20000, 25000, 22000, 23000}), 2, 1, c);
  EXPECT_GT(long_mb.per_minibatch_tgs[0], short_mb.per_minibatch_tgs[0]);
}

TEST(Train, Errors) {
  EXPECT_THROW(TrainTime(Outputs({1, 2}), 2, 3, CostModel{}), SimError);
  EXPECT_THROW(TrainTime(Outputs({1, 2}), 2, 0, CostModel{}), SimError);
}

TEST(Train, QuadraticTerm) {
  CostModel c;
  c.t_train_quadratic = 1e-3;
  EXPECT_DOUBLE_EQ(TrainTime(Outputs({100}), 1, 1, c).seconds, 1e-3 * 100 * 100);
}

TEST(Step, IdleFractionExample) {
  WorkloadStep step{0, Outputs({10, 2, 3, 3})};
  ClusterSpec cluster;
  cluster.rollout_ranks = 2;
  cluster.train_ranks = 2;
  SimPolicies p;
  p.rollout_policy = BalancePolicy::kFcfsRoundRobin;
  const StepSimResult r = SimulateStep(step, cluster, DecodeOnly(), p);
  EXPECT_DOUBLE_EQ(r.rollout_time, 10);
  EXPECT_EQ(r.rollout_rank_busy, (std::vector<double>{10, 3}));
  EXPECT_DOUBLE_EQ(r.rollout_idle_fraction, 0.35);
  EXPECT_EQ(r.tokens, 18);
  EXPECT_DOUBLE_EQ(r.rollout_tgs, 0.9);
}

TEST(Step, IdenticalRequestsHaveNoRolloutIdle) {
  ClusterSpec cluster;
  cluster.rollout_ranks = 4;
  for (auto policy : {BalancePolicy::kFcfsRoundRobin, BalancePolicy::kLptGreedy}) {
    SimPolicies p;
    p.rollout_policy = policy;
    const StepSimResult r = SimulateStep({0, Outputs(std::vector<int64_t>(8, 7))}, cluster, DecodeOnly(), p);
    EXPECT_EQ(r.rollout_idle_fraction, 0.0);
  }
}

TEST(Step, ColocatedTotalAndInference) {
  CostModel c;
  c.t_decode_per_token = 0.5;
  c.t_train_per_token = 0.01;
  c.t_comm_per_minibatch = 1;
  c.t_weight_sync = 3;
  ClusterSpec cluster;
  cluster.train_ranks = 2;
  SimPolicies p;
  p.inference_factor = 0.5;
  const StepSimResult r = SimulateStep({0, Outputs({100, 100})}, cluster, c, p);
  EXPECT_DOUBLE_EQ(r.rollout_time, 50);
  EXPECT_DOUBLE_EQ(r.train_time, 1 + 1);
  EXPECT_DOUBLE_EQ(r.inference_time, 0.5);
  EXPECT_DOUBLE_EQ(r.total_time, 50 + 0.5 + 2 + 3);
}

TEST(Step, DropFilteredForTraining) {
  std::vector<TraceRecord> rs = Outputs({10, 20});
  rs[1].filtered = true;
  CostModel c = DecodeOnly();
  c.t_train_per_token = 1;
  SimPolicies p;
  p.drop_filtered_for_training = true;
  const StepSimResult r = SimulateStep({0, rs}, ClusterSpec{}, c, p);
  EXPECT_EQ(r.train_tokens, 10);
  EXPECT_DOUBLE_EQ(r.train_time, 10);
  EXPECT_DOUBLE_EQ(r.rollout_time, 20);
}

TEST(Step, Invariants) {
  testing::Gen g(33);
  CostModel c;
  c.t_prefill_per_token = 1e-5;
  c.t_decode_per_token = 0.02;
  c.t_train_per_token = 1e-4;
  c.t_comm_per_minibatch = 0.3;
  c.t_sched_per_request = 1e-3;
  for (int t = 0; t < 100; ++t) {
    std::vector<TraceRecord> rs;
    for (int64_t i = g.Int(4, 64); i > 0; --i) rs.push_back(Req(g.Int(1, 3000), g.LogUniform(1, 30000)));
    ClusterSpec cluster;
    cluster.rollout_ranks = static_cast<int>(g.Int(1, 8));
    cluster.train_ranks = static_cast<int>(g.Int(1, 8));
    SimPolicies p;
    p.minibatches = static_cast<int>(g.Int(1, 4));
    const StepSimResult r = SimulateStep({0, rs}, cluster, c, p);
    int64_t max_out = 0;
    for (const auto& x : rs) max_out = std::max(max_out, x.output_len);
    EXPECT_GE(r.rollout_time, c.t_decode_per_token * static_cast<double>(max_out));
    EXPECT_GE(r.total_time, std::max({r.rollout_time, r.inference_time, r.train_time}));
    for (double f : {r.idle_fraction, r.rollout_idle_fraction, r.train_idle_fraction, r.inference_idle_fraction}) {
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
    const double sum_busy = std::accumulate(r.rollout_rank_busy.begin(), r.rollout_rank_busy.end(), 0.0);
    EXPECT_NEAR(r.rollout_idle_fraction, 1 - sum_busy / (cluster.rollout_ranks * r.rollout_time), 1e-12);
    const double agg = static_cast<double>(r.train_tokens) / (cluster.train_ranks * r.train_time);
    const auto [mn, mx] = std::minmax_element(r.per_minibatch_tgs.begin(), r.per_minibatch_tgs.end());
    EXPECT_GE(agg, *mn * (1 - 1e-12));
    EXPECT_LE(agg, *mx * (1 + 1e-12));
    for (double tgs : r.per_minibatch_tgs) EXPECT_TRUE(std::isfinite(tgs) && tgs >= 0);
  }
}

TEST(Step, FlatScalingOnLongTail) {
  std::vector<TraceRecord> rs = Outputs(std::vector<int64_t>(63, 300));
  rs.push_back(Req(0, 32000));
  double prev_idle = -1;
  for (int k : {1, 2, 4, 8}) {
    ClusterSpec cluster;
    cluster.rollout_ranks = k;
    const StepSimResult r = SimulateStep({0, rs}, cluster, DecodeOnly(), SimPolicies{});
    EXPECT_DOUBLE_EQ(r.rollout_time, 32000);
    EXPECT_GE(r.rollout_idle_fraction, prev_idle);
    prev_idle = r.rollout_idle_fraction;
  }
  EXPECT_GT(prev_idle, 0.8);
}

TEST(Validate, RejectsBadSpecs) {
  ClusterSpec cluster;
  cluster.rollout_ranks = 0;
  EXPECT_THROW(cluster.Validate(), SimError);
  CostModel c;
  c.t_decode_per_token = -1;
  EXPECT_THROW(c.Validate(), SimError);
  EXPECT_EQ(ParseToolMode("overlapped"), ToolMode::kOverlapped);
  EXPECT_THROW(ParseVictimPolicy("random"), std::invalid_argument);
}

}  // namespace
}  // namespace rlvrsim
