// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/balancer.h"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace rlvrsim {
namespace {

// Least-loaded rank, lowest id on ties.
int LeastLoaded(const std::vector<int64_t>& loads) {
  return static_cast<int>(std::min_element(loads.begin(), loads.end()) - loads.begin());
}

void Finish(Assignment& a) {
  a.makespan_tokens = a.rank_loads.empty() ? 0 : *std::max_element(a.rank_loads.begin(), a.rank_loads.end());
}

// LPT over units; unit_rank[u] receives the rank of unit u.
std::vector<int> LptUnits(std::span<const int64_t> unit_weights, int ranks, std::vector<int64_t>& loads) {
  std::vector<size_t> order(unit_weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return unit_weights[a] > unit_weights[b]; });
  loads.assign(static_cast<size_t>(ranks), 0);
  std::vector<int> unit_rank(unit_weights.size(), 0);
  for (size_t u : order) {
    const int r = LeastLoaded(loads);
    unit_rank[u] = r;
    loads[static_cast<size_t>(r)] += unit_weights[u];
  }
  return unit_rank;
}

}  // namespace

const char* ToString(BalancePolicy policy) {
  switch (policy) {
    case BalancePolicy::kFcfsRoundRobin: return "fcfs_round_robin";
    case BalancePolicy::kLptGreedy: return "lpt_greedy";
    case BalancePolicy::kPromptGroupLpt: return "prompt_group_lpt";
  }
  return "unknown";
}

const char* ToString(BalanceWeight weight) {
  return weight == BalanceWeight::kOutputTokens ? "output_tokens" : "total_tokens";
}

BalancePolicy ParseBalancePolicy(const std::string& name) {
  if (name == "fcfs_round_robin" || name == "fcfs") return BalancePolicy::kFcfsRoundRobin;
  if (name == "lpt_greedy" || name == "lpt") return BalancePolicy::kLptGreedy;
  if (name == "prompt_group_lpt" || name == "prompt_lpt") return BalancePolicy::kPromptGroupLpt;
  throw std::invalid_argument("unknown balance policy '" + name + "'");
}

BalanceWeight ParseBalanceWeight(const std::string& name) {
  if (name == "output_tokens" || name == "output") return BalanceWeight::kOutputTokens;
  if (name == "total_tokens" || name == "total") return BalanceWeight::kTotalTokens;
  throw std::invalid_argument("unknown balance weight '" + name + "'");
}

std::vector<size_t> Assignment::RequestsOf(int rank) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < rank_of.size(); ++i) {
    if (rank_of[i] == rank) out.push_back(i);
  }
  return out;
}

int64_t RequestWeight(const TraceRecord& r, BalanceWeight weight) {
  return weight == BalanceWeight::kOutputTokens ? r.output_len : r.input_len + r.output_len;
}

Assignment LptPartition(std::span<const int64_t> weights, int ranks) {
  if (ranks < 1) throw BalanceError("rank count must be at least 1");
  Assignment a;
  a.rank_of = LptUnits(weights, ranks, a.rank_loads);
  Finish(a);
  return a;
}

Assignment Assign(std::span<const TraceRecord> requests, int ranks, BalancePolicy policy,
                  BalanceWeight weight) {
  if (ranks < 1) throw BalanceError("rank count must be at least 1");
  Assignment a;
  std::vector<int64_t> w;
  w.reserve(requests.size());
  for (const auto& r : requests) w.push_back(RequestWeight(r, weight));

  switch (policy) {
    case BalancePolicy::kFcfsRoundRobin:
      a.rank_loads.assign(static_cast<size_t>(ranks), 0);
      a.rank_of.resize(requests.size());
      for (size_t i = 0; i < requests.size(); ++i) {
        const int r = static_cast<int>(i % static_cast<size_t>(ranks));
        a.rank_of[i] = r;
        a.rank_loads[static_cast<size_t>(r)] += w[i];
      }
      break;
    case BalancePolicy::kLptGreedy:
      a.rank_of = LptUnits(w, ranks, a.rank_loads);
      break;
    case BalancePolicy::kPromptGroupLpt: {
      std::vector<size_t> unit_of(requests.size());
      std::vector<int64_t> unit_weight;
      std::unordered_map<std::string, size_t> index;
      for (size_t i = 0; i < requests.size(); ++i) {
        size_t u = unit_weight.size();
        if (requests[i].prompt_id) {
          auto [it, inserted] = index.try_emplace(*requests[i].prompt_id, u);
          u = it->second;
          if (inserted) unit_weight.push_back(0);
        } else {
          unit_weight.push_back(0);
        }
        unit_of[i] = u;
        unit_weight[u] += w[i];
      }
      if (static_cast<size_t>(ranks) > unit_weight.size()) {
        throw BalanceError("prompt_group_lpt: " + std::to_string(ranks) + " ranks exceed " +
                           std::to_string(unit_weight.size()) + " prompt groups");
      }
      const std::vector<int> unit_rank = LptUnits(unit_weight, ranks, a.rank_loads);
      a.rank_of.resize(requests.size());
      for (size_t i = 0; i < requests.size(); ++i) a.rank_of[i] = unit_rank[unit_of[i]];
      break;
    }
  }
  Finish(a);
  return a;
}

double ImbalanceRatio(const Assignment& a) {
  const int64_t total = std::accumulate(a.rank_loads.begin(), a.rank_loads.end(), int64_t{0});
  if (total <= 0 || a.rank_loads.empty()) return 1.0;
  const double mean = static_cast<double>(total) / static_cast<double>(a.rank_loads.size());
  return static_cast<double>(a.makespan_tokens) / mean;
}

}  // namespace rlvrsim
