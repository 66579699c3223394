// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rlvrsim/trace.h"

namespace rlvrsim {

class GeneratorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which source step feeds each generated step.
struct StepSelector {
  enum class Kind { kSpecific, kCycle, kUniformRandom };
  Kind kind = Kind::kCycle;
  int64_t step = 0;  // kSpecific only

  static StepSelector Specific(int64_t step) { return {Kind::kSpecific, step}; }
  static StepSelector Cycle() { return {Kind::kCycle, 0}; }
  static StepSelector UniformRandom() { return {Kind::kUniformRandom, 0}; }
};

struct SampleSpec {
  int64_t batch_size = 1;          // prompts per generated step
  int64_t samples_per_prompt = 16;  // G
  TaskType task_type;
  StepSelector step_selector;
  int64_t num_steps = 1;
  std::optional<int64_t> max_response_len;
  bool with_replacement = true;
  uint64_t seed = 0;
};

struct GeneratedWorkload {
  std::vector<WorkloadStep> steps;
  /// Source step each generated step was drawn from.
  std::vector<int64_t> source_steps;
  /// Samples whose output was clamped to max_response_len, per step.
  std::vector<int64_t> truncated;
  /// True when the source carried prompt_id and whole groups were sampled.
  bool prompt_grouped = false;
};

/// Draws batch_size prompt groups of G samples per generated step. With
/// prompt_id in the source, all G samples of a generated prompt come from one
/// source group (a random permutation of it, cycled when G exceeds its size);
/// otherwise samples are drawn i.i.d. from the step's records. Filtered source
/// samples never feed the generator. Generated step ids are 0..num_steps-1.
GeneratedWorkload SampleWorkload(const Trace& source, const SampleSpec& spec);

/// Flattens a generated workload back into the trace schema.
Trace ToTrace(const GeneratedWorkload& workload, std::string source_name = "generated");

struct LatencyModel {
  enum class Mode { kEmpiricalResample, kFixed, kZero };
  Mode mode = Mode::kZero;
  std::vector<double> empirical_samples_ms;
  double fixed_ms = 0;

  static LatencyModel Zero() { return {}; }
  static LatencyModel Fixed(double ms) { return {Mode::kFixed, {}, ms}; }
  static LatencyModel Empirical(std::vector<double> samples) {
    return {Mode::kEmpiricalResample, std::move(samples), 0};
  }
};

/// Tool-call latencies in milliseconds; empirical mode resamples uniformly
/// with replacement.
std::vector<double> SampleToolLatency(const LatencyModel& model, int64_t n, uint64_t seed);

/// Parametric fixture recipes for synthetic traces.
struct SynthRecipe {
  enum class Shape { kLongTail, kBandedInput, kTurnLinear };
  Shape shape = Shape::kLongTail;
  TaskType task_type;
  uint64_t seed = 0;

  // Output body is uniform on [body_min_output, body_max_output]; with
  // probability tail_mass a draw comes from [tail_min_output, tail_max_output].
  int64_t body_min_output = 1000;
  int64_t body_max_output = 4000;
  double tail_mass = 0.05;
  int64_t tail_min_output = 16000;
  int64_t tail_max_output = 32000;
  double output_growth_per_step = 0.0;  // output *= 1 + growth * step

  // kLongTail inputs.
  int64_t input_min = 50;
  int64_t input_max = 600;

  // kBandedInput: input = band_base + k * band_width + U[0, band_jitter], k < bands.
  int64_t band_base = 200;
  int64_t band_width = 1280;
  int64_t band_jitter = 64;
  int64_t bands = 4;

  // kTurnLinear: input = turns * per_turn_input +- input_jitter; turns drawn
  // from turn_weights (index 0 = one turn). Multi-turn samples emit short
  // outputs and turns - 1 tool calls with log-normal latency.
  int64_t per_turn_input = 500;
  int64_t input_jitter = 100;
  std::vector<double> turn_weights = {0.05, 0.10, 0.25, 0.25, 0.20, 0.10, 0.05};
  int64_t shift_step = -1;  // from this step on, turn_weights_after_shift apply
  std::vector<double> turn_weights_after_shift = {0.30, 0.40, 0.20, 0.10};
  int64_t multi_turn_output_min = 80;
  int64_t multi_turn_output_max = 200;
  double tool_latency_median_ms = 300.0;
  double tool_latency_sigma = 0.8;

  // Prompt clustering: each prompt draws a base output, samples jitter it by
  // a uniform factor in [1 - noise, 1 + noise].
  int64_t samples_per_prompt = 1;
  double within_prompt_noise = 0.0;
};

/// Deterministic under recipe.seed; every record satisfies the trace invariants.
Trace SynthesizeTrace(const SynthRecipe& recipe, int64_t steps, int64_t per_step);

}  // namespace rlvrsim
