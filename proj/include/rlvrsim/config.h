// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rlvrsim/pipeline.h"

namespace rlvrsim {

/// Malformed or inconsistent configuration file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sets the mode and the matching placement: colocated for sync_colocated,
/// disjoint pools otherwise.
void SetMode(RunConfig& config, RunMode mode);

/// Defaults used by the command-line tool: illustrative nonzero coefficients
/// so that an unconfigured run produces meaningful times.
RunConfig DefaultRunConfig();

/// Overlays a JSON config document onto `config`. Recognized sections:
///
///   cluster   rollout_ranks, train_ranks, kv_capacity_tokens
///   cost      t_prefill_per_token, t_decode_per_token, t_train_per_token,
///             t_train_quadratic, t_comm_per_minibatch, t_sched_per_request,
///             t_weight_sync (all seconds)
///   policies  rollout_policy, rollout_weight, train_policy, train_weight,
///             tool_mode, victim, inference_factor, minibatches,
///             drop_filtered_for_training
///   sample    batch_size, samples_per_prompt, task_type, step_selector
///             ("cycle", "random" or a step number), num_steps,
///             max_response_len, with_replacement, seed
///   run       mode, max_staleness, steps, max_response_len
///
/// Keys that are absent keep their current value; unknown sections or keys
/// are errors. A null kv_capacity_tokens or max_response_len clears it.
/// Placement follows run.mode (see SetMode).
void ApplyConfigJson(const std::string& text, RunConfig& config);
void ApplyConfigFile(const std::filesystem::path& path, RunConfig& config);

/// Canonical JSON of every effective setting, sorted keys, no whitespace.
std::string CanonicalConfigJson(const RunConfig& config);

/// 16 hex digits of FNV-1a 64.
std::string Fnv1aHex(std::string_view text);
/// Fnv1aHex(CanonicalConfigJson(config)).
std::string ConfigDigest(const RunConfig& config);

}  // namespace rlvrsim
