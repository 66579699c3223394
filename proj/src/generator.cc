// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/generator.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "rlvrsim/rng.h"

namespace rlvrsim {
namespace {

// Sampling units of one source step: each unit is a list of records that
// must travel together (a prompt group, or a single record).
struct SourceStep {
  int64_t step = 0;
  std::vector<std::vector<const TraceRecord*>> groups;  // grouped mode
  std::vector<const TraceRecord*> pool;                 // i.i.d. mode
};

std::vector<SourceStep> BuildSources(const std::vector<WorkloadStep>& steps, bool grouped) {
  std::vector<SourceStep> sources;
  for (const auto& ws : steps) {
    SourceStep src;
    src.step = ws.step;
    std::unordered_map<std::string, size_t> index;
    for (const auto& r : ws.requests) {
      if (r.filtered) continue;
      if (!grouped) {
        src.pool.push_back(&r);
      } else if (!r.prompt_id) {
        src.groups.push_back({&r});
      } else {
        auto [it, inserted] = index.try_emplace(*r.prompt_id, src.groups.size());
        if (inserted) src.groups.emplace_back();
        src.groups[it->second].push_back(&r);
      }
    }
    if (!src.groups.empty() || !src.pool.empty()) sources.push_back(std::move(src));
  }
  return sources;
}

// n distinct indices from [0, size) via partial Fisher-Yates, or n draws with
// replacement.
std::vector<size_t> ChooseUnits(Rng& rng, size_t size, size_t n, bool with_replacement) {
  std::vector<size_t> out;
  out.reserve(n);
  if (with_replacement) {
    for (size_t i = 0; i < n; ++i) out.push_back(rng.UniformIndex(size));
    return out;
  }
  std::vector<size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  for (size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + rng.UniformIndex(size - i)]);
    out.push_back(idx[i]);
  }
  return out;
}

TraceRecord Emit(const TraceRecord& src, const SampleSpec& spec, int64_t step, int64_t prompt,
                 int64_t sample, int64_t& truncated) {
  TraceRecord r;
  r.step = step;
  r.input_len = src.input_len;
  r.output_len = src.output_len;
  if (spec.max_response_len && r.output_len > *spec.max_response_len) {
    r.output_len = *spec.max_response_len;
    ++truncated;
  }
  r.task_type = spec.task_type;
  r.prompt_id = "s" + std::to_string(step) + "-p" + std::to_string(prompt);
  r.sample_id = sample;
  r.turn_count = src.turn_count;
  r.tool_latencies_ms = src.tool_latencies_ms;
  return r;
}

void ValidateSpec(const SampleSpec& spec) {
  if (spec.batch_size < 1) throw GeneratorError("batch_size must be positive");
  if (spec.samples_per_prompt < 1) throw GeneratorError("samples_per_prompt must be positive");
  if (spec.num_steps < 0) throw GeneratorError("num_steps must be non-negative");
  if (spec.max_response_len && *spec.max_response_len < 1) {
    throw GeneratorError("max_response_len must be >= 1 when set");
  }
}

int64_t DrawOutput(const SynthRecipe& r, Rng& rng) {
  if (r.tail_mass > 0 && rng.Bernoulli(r.tail_mass)) return rng.UniformInt(r.tail_min_output, r.tail_max_output);
  return rng.UniformInt(r.body_min_output, r.body_max_output);
}

void ValidateRecipe(const SynthRecipe& r, int64_t steps, int64_t per_step) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw GeneratorError(std::string("invalid recipe: ") + what);
  };
  require(steps >= 0 && per_step >= 0, "steps and per_step must be non-negative");
  require(r.body_min_output >= 0 && r.body_min_output <= r.body_max_output, "body output range");
  require(r.tail_mass >= 0 && r.tail_mass <= 1, "tail_mass must lie in [0, 1]");
  require(r.tail_mass == 0 || (r.tail_min_output >= 0 && r.tail_min_output <= r.tail_max_output),
          "tail output range");
  require(r.output_growth_per_step > -1, "output_growth_per_step must exceed -1");
  require(r.input_min >= 0 && r.input_min <= r.input_max, "input range");
  require(r.band_base >= 0 && r.band_width >= 0 && r.band_jitter >= 0 && r.bands >= 1, "band parameters");
  require(r.per_turn_input >= 0 && r.input_jitter >= 0, "turn input parameters");
  auto positive_weights = [](const std::vector<double>& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](double x) { return x >= 0; }) &&
           std::accumulate(w.begin(), w.end(), 0.0) > 0;
  };
  require(positive_weights(r.turn_weights), "turn_weights");
  require(r.shift_step < 0 || positive_weights(r.turn_weights_after_shift), "turn_weights_after_shift");
  require(r.multi_turn_output_min >= 0 && r.multi_turn_output_min <= r.multi_turn_output_max,
          "multi-turn output range");
  require(r.tool_latency_median_ms >= 0 && r.tool_latency_sigma >= 0, "tool latency parameters");
  require(r.samples_per_prompt >= 1, "samples_per_prompt must be positive");
  require(r.within_prompt_noise >= 0 && r.within_prompt_noise < 1, "within_prompt_noise must lie in [0, 1)");
}

}  // namespace

GeneratedWorkload SampleWorkload(const Trace& source, const SampleSpec& spec) {
  ValidateSpec(spec);
  const Trace task = FilterByTask(source, spec.task_type);
  if (task.records.empty()) {
    throw GeneratorError("no records for task type '" + spec.task_type.ToString() + "'");
  }
  const bool grouped = std::any_of(task.records.begin(), task.records.end(),
                                   [](const TraceRecord& r) { return r.prompt_id.has_value(); });
  const std::vector<WorkloadStep> steps = GroupByStep(task);
  const std::vector<SourceStep> sources = BuildSources(steps, grouped);
  if (sources.empty()) throw GeneratorError("every source sample is filtered");

  const SourceStep* specific = nullptr;
  if (spec.step_selector.kind == StepSelector::Kind::kSpecific) {
    auto it = std::find_if(sources.begin(), sources.end(),
                           [&](const SourceStep& s) { return s.step == spec.step_selector.step; });
    if (it == sources.end()) {
      throw GeneratorError("source has no usable records at step " + std::to_string(spec.step_selector.step));
    }
    specific = &*it;
  }

  const Rng root(spec.seed);
  const auto bsz = static_cast<size_t>(spec.batch_size);
  const auto g = static_cast<size_t>(spec.samples_per_prompt);
  GeneratedWorkload out;
  out.prompt_grouped = grouped;
  for (int64_t i = 0; i < spec.num_steps; ++i) {
    Rng rng = root.Split(static_cast<uint64_t>(i));
    const SourceStep* src = specific;
    if (spec.step_selector.kind == StepSelector::Kind::kCycle) {
      src = &sources[static_cast<size_t>(i) % sources.size()];
    } else if (spec.step_selector.kind == StepSelector::Kind::kUniformRandom) {
      src = &sources[rng.UniformIndex(sources.size())];
    }

    WorkloadStep ws;
    ws.step = i;
    ws.requests.reserve(bsz * g);
    int64_t truncated = 0;
    if (grouped) {
      if (!spec.with_replacement && bsz > src->groups.size()) {
        throw GeneratorError("batch_size " + std::to_string(bsz) + " exceeds the " +
                             std::to_string(src->groups.size()) + " prompts available at step " +
                             std::to_string(src->step) + " without replacement");
      }
      const auto chosen = ChooseUnits(rng, src->groups.size(), bsz, spec.with_replacement);
      for (size_t p = 0; p < bsz; ++p) {
        std::vector<const TraceRecord*> group = src->groups[chosen[p]];
        rng.Shuffle(group);
        for (size_t j = 0; j < g; ++j) {
          ws.requests.push_back(Emit(*group[j % group.size()], spec, i, static_cast<int64_t>(p),
                                     static_cast<int64_t>(j), truncated));
        }
      }
    } else {
      if (!spec.with_replacement && bsz * g > src->pool.size()) {
        throw GeneratorError("batch_size * G exceeds the " + std::to_string(src->pool.size()) +
                             " samples available at step " + std::to_string(src->step) +
                             " without replacement");
      }
      const auto chosen = ChooseUnits(rng, src->pool.size(), bsz * g, spec.with_replacement);
      for (size_t k = 0; k < chosen.size(); ++k) {
        ws.requests.push_back(Emit(*src->pool[chosen[k]], spec, i, static_cast<int64_t>(k / g),
                                   static_cast<int64_t>(k % g), truncated));
      }
    }
    out.steps.push_back(std::move(ws));
    out.source_steps.push_back(src->step);
    out.truncated.push_back(truncated);
  }
  return out;
}

Trace ToTrace(const GeneratedWorkload& workload, std::string source_name) {
  Trace t;
  t.source_name = std::move(source_name);
  for (const auto& ws : workload.steps) {
    t.records.insert(t.records.end(), ws.requests.begin(), ws.requests.end());
  }
  return t;
}

std::vector<double> SampleToolLatency(const LatencyModel& model, int64_t n, uint64_t seed) {
  if (n < 0) throw GeneratorError("latency sample count must be non-negative");
  const auto count = static_cast<size_t>(n);
  switch (model.mode) {
    case LatencyModel::Mode::kZero: return std::vector<double>(count, 0.0);
    case LatencyModel::Mode::kFixed:
      if (!(model.fixed_ms >= 0) || !std::isfinite(model.fixed_ms)) {
        throw GeneratorError("fixed latency must be finite and non-negative");
      }
      return std::vector<double>(count, model.fixed_ms);
    case LatencyModel::Mode::kEmpiricalResample: break;
  }
  if (model.empirical_samples_ms.empty()) throw GeneratorError("empirical latency model has no samples");
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(count);
  const size_t m = model.empirical_samples_ms.size();
  for (size_t i = 0; i < count; ++i) out.push_back(model.empirical_samples_ms[rng.UniformIndex(m)]);
  return out;
}

Trace SynthesizeTrace(const SynthRecipe& recipe, int64_t steps, int64_t per_step) {
  ValidateRecipe(recipe, steps, per_step);
  Trace trace;
  trace.source_name = "synthetic";
  const Rng root(recipe.seed);
  const int64_t g = recipe.samples_per_prompt;
  for (int64_t step = 0; step < steps; ++step) {
    Rng rng = root.Split(static_cast<uint64_t>(step));
    const double growth = 1.0 + recipe.output_growth_per_step * static_cast<double>(step);
    int64_t base_output = 0;
    for (int64_t k = 0; k < per_step; ++k) {
      const int64_t prompt = k / g;
      const int64_t sample = k % g;
      TraceRecord r;
      r.step = step;
      r.task_type = recipe.task_type;
      if (g > 1) {
        r.prompt_id = "s" + std::to_string(step) + "-p" + std::to_string(prompt);
        r.sample_id = sample;
      }

      int64_t output = 0;
      switch (recipe.shape) {
        case SynthRecipe::Shape::kLongTail:
          r.input_len = rng.UniformInt(recipe.input_min, recipe.input_max);
          output = DrawOutput(recipe, rng);
          break;
        case SynthRecipe::Shape::kBandedInput: {
          const int64_t band = rng.UniformInt(0, recipe.bands - 1);
          r.input_len = recipe.band_base + band * recipe.band_width + rng.UniformInt(0, recipe.band_jitter);
          output = DrawOutput(recipe, rng);
          break;
        }
        case SynthRecipe::Shape::kTurnLinear: {
          const bool shifted = recipe.shift_step >= 0 && step >= recipe.shift_step;
          const auto& weights = shifted ? recipe.turn_weights_after_shift : recipe.turn_weights;
          const int64_t turns = static_cast<int64_t>(rng.Categorical(weights)) + 1;
          r.turn_count = turns;
          r.input_len = std::max<int64_t>(
              0, turns * recipe.per_turn_input + rng.UniformInt(-recipe.input_jitter, recipe.input_jitter));
          output = turns == 1 ? DrawOutput(recipe, rng)
                              : rng.UniformInt(recipe.multi_turn_output_min, recipe.multi_turn_output_max);
          std::vector<double> calls;
          for (int64_t c = 1; c < turns; ++c) {
            const double ms = recipe.tool_latency_median_ms * std::exp(recipe.tool_latency_sigma * rng.Normal());
            calls.push_back(std::round(ms * 1000.0) / 1000.0);
          }
          r.tool_latencies_ms = std::move(calls);
          break;
        }
      }

      if (g > 1) {
        // The first sample of a prompt fixes its base length.
        if (sample == 0) base_output = output;
        const double factor = 1.0 + recipe.within_prompt_noise * rng.Uniform(-1.0, 1.0);
        output = std::llround(static_cast<double>(base_output) * factor);
      }
      r.output_len = std::max<int64_t>(0, std::llround(static_cast<double>(output) * growth));
      trace.records.push_back(std::move(r));
    }
  }
  return trace;
}

}  // namespace rlvrsim
