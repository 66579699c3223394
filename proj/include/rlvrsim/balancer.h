// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rlvrsim/trace.h"

namespace rlvrsim {

enum class BalancePolicy { kFcfsRoundRobin, kLptGreedy, kPromptGroupLpt };
enum class BalanceWeight { kOutputTokens, kTotalTokens };

const char* ToString(BalancePolicy policy);
const char* ToString(BalanceWeight weight);
BalancePolicy ParseBalancePolicy(const std::string& name);
BalanceWeight ParseBalanceWeight(const std::string& name);

class BalanceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Assignment {
  std::vector<int> rank_of;  // request index -> rank
  std::vector<int64_t> rank_loads;
  int64_t makespan_tokens = 0;

  int ranks() const { return static_cast<int>(rank_loads.size()); }
  /// Request indices of `rank` in arrival order.
  std::vector<size_t> RequestsOf(int rank) const;
};

int64_t RequestWeight(const TraceRecord& r, BalanceWeight weight);

/// fcfs_round_robin: arrival order, cyclic. lpt_greedy: weight descending
/// (stable), each to the least-loaded rank, ties to the lowest rank id.
/// prompt_group_lpt: LPT over whole prompt groups (records without prompt_id
/// are singleton groups).
Assignment Assign(std::span<const TraceRecord> requests, int ranks, BalancePolicy policy,
                  BalanceWeight weight);

/// LPT over bare weights; returns rank of each item.
Assignment LptPartition(std::span<const int64_t> weights, int ranks);

/// makespan / mean rank load; 1 when the total load is zero.
double ImbalanceRatio(const Assignment& a);

}  // namespace rlvrsim
