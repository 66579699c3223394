// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// rlvrsim command-line tool. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 simulation error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rlvrsim/balancer.h"
#include "rlvrsim/config.h"
#include "rlvrsim/generator.h"
#include "rlvrsim/pipeline.h"
#include "rlvrsim/report.h"
#include "rlvrsim/stats.h"
#include "rlvrsim/trace.h"

namespace fs = std::filesystem;
using namespace rlvrsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSim = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  uint64_t seed = 0;
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "csv";
  CLI::Option* seed_opt = nullptr;
};

// Where workload records come from: a trace file or a synthetic recipe.
struct SourceFlags {
  std::string trace_path;
  std::string trace_format;
  std::string synth;
  int64_t synth_steps = 8;
  int64_t synth_per_step = 256;

  void Register(CLI::App* cmd) {
    cmd->add_option("--trace", trace_path, "Trace file (CSV or JSONL)");
    cmd->add_option("--trace-format", trace_format, "Trace format; inferred from the extension when omitted")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    cmd->add_option("--synth", synth, "Synthetic source instead of a trace")
        ->check(CLI::IsMember({"long_tail", "banded_input", "turn_linear"}));
    cmd->add_option("--synth-steps", synth_steps, "Steps in the synthetic source")->check(CLI::PositiveNumber);
    cmd->add_option("--synth-per-step", synth_per_step, "Records per synthetic step")->check(CLI::PositiveNumber);
  }

  Trace Load(uint64_t seed) const {
    if (trace_path.empty() == synth.empty()) throw UsageError("exactly one of --trace or --synth is required");
    if (!trace_path.empty()) {
      const TraceFormat fmt = trace_format.empty() ? FormatFromPath(trace_path) : ParseTraceFormat(trace_format);
      ParseWarnings warnings;
      Trace t = ParseTrace(trace_path, fmt, &warnings);
      if (warnings.unknown_columns > 0) {
        std::cerr << "warning: " << trace_path << ": ignored " << warnings.unknown_columns << " unknown column(s)\n";
      }
      if (warnings.unknown_task_types > 0) {
        std::cerr << "warning: " << trace_path << ": " << warnings.unknown_task_types
                  << " record(s) with unrecognized task type\n";
      }
      return t;
    }
    SynthRecipe r;
    r.seed = seed;
    if (synth == "long_tail") {
      r.shape = SynthRecipe::Shape::kLongTail;
      r.task_type = TaskType::Kind::kMathematics;
      r.samples_per_prompt = 16;
      r.within_prompt_noise = 0.2;
    } else if (synth == "banded_input") {
      r.shape = SynthRecipe::Shape::kBandedInput;
      r.task_type = TaskType::Kind::kImageUnderstanding;
    } else {
      r.shape = SynthRecipe::Shape::kTurnLinear;
      r.task_type = TaskType::Kind::kToolUse;
    }
    Trace t = SynthesizeTrace(r, synth_steps, synth_per_step);
    t.source_name = "synth:" + synth;
    return t;
  }
};

// Flags that override RunConfig fields; applied after the config file.
struct RunFlags {
  std::string mode;
  int64_t staleness = 0;
  int64_t steps = 0;
  int rollout_ranks = 1;
  int train_ranks = 1;
  int64_t kv_capacity = 0;
  int minibatches = 1;
  std::string rollout_policy, train_policy, tool_mode, victim;
  double inference_factor = 0;
  int64_t max_response_len = 0;
  double t_prefill = 0, t_decode = 0, t_train = 0, t_train_quad = 0, t_comm = 0, t_sched = 0, t_sync = 0;
  // Generator flags; any of them switches the run to generated workloads.
  int64_t bsz = 0;
  int64_t g = 0;
  std::string selector;
  std::string task;

  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> setters;

  template <typename T>
  CLI::Option* Add(CLI::App* cmd, const std::string& name, T& field, const std::string& help,
                   std::function<void(RunConfig&)> apply) {
    CLI::Option* opt = cmd->add_option(name, field, help);
    setters.emplace_back(opt, std::move(apply));
    return opt;
  }

  void Register(CLI::App* cmd) {
    Add(cmd, "--mode", mode, "sync_colocated | sync_split | async_split (or colocated, sync, async)",
        [this](RunConfig& c) { SetMode(c, ParseRunMode(mode)); });
    Add(cmd, "--staleness", staleness, "Maximum permitted staleness S",
        [this](RunConfig& c) { c.max_staleness = staleness; })
        ->check(CLI::NonNegativeNumber);
    Add(cmd, "--steps", steps, "Steps to run (0 = all)", [this](RunConfig& c) { c.steps = steps; })
        ->check(CLI::NonNegativeNumber);
    Add(cmd, "--rollout-ranks", rollout_ranks, "Rollout ranks",
        [this](RunConfig& c) { c.cluster.rollout_ranks = rollout_ranks; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--train-ranks", train_ranks, "Training ranks", [this](RunConfig& c) { c.cluster.train_ranks = train_ranks; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--kv-capacity", kv_capacity, "KV capacity per rollout rank in tokens",
        [this](RunConfig& c) { c.cluster.kv_capacity_tokens = kv_capacity; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--minibatches", minibatches, "Mini-batches per step",
        [this](RunConfig& c) { c.policies.minibatches = minibatches; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--rollout-policy", rollout_policy, "fcfs_round_robin | lpt_greedy | prompt_group_lpt",
        [this](RunConfig& c) { c.policies.rollout_policy = ParseBalancePolicy(rollout_policy); });
    Add(cmd, "--train-policy", train_policy, "fcfs_round_robin | lpt_greedy | prompt_group_lpt",
        [this](RunConfig& c) { c.policies.train_policy = ParseBalancePolicy(train_policy); });
    Add(cmd, "--tool-mode", tool_mode, "blocking | overlapped",
        [this](RunConfig& c) { c.policies.tool_mode = ParseToolMode(tool_mode); });
    Add(cmd, "--victim", victim, "KV eviction victim: most_recent | least_progress",
        [this](RunConfig& c) { c.policies.victim = ParseVictimPolicy(victim); });
    Add(cmd, "--inference-factor", inference_factor, "Inference cost relative to training",
        [this](RunConfig& c) { c.policies.inference_factor = inference_factor; })
        ->check(CLI::NonNegativeNumber);
    Add(cmd, "--max-response-len", max_response_len, "Clamp output lengths",
        [this](RunConfig& c) { c.max_response_len = max_response_len; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--t-prefill", t_prefill, "Seconds per prefill token",
        [this](RunConfig& c) { c.cost.t_prefill_per_token = t_prefill; });
    Add(cmd, "--t-decode", t_decode, "Seconds per decode iteration",
        [this](RunConfig& c) { c.cost.t_decode_per_token = t_decode; });
    Add(cmd, "--t-train", t_train, "Seconds per training token",
        [this](RunConfig& c) { c.cost.t_train_per_token = t_train; });
    Add(cmd, "--t-train-quad", t_train_quad, "Seconds per squared training token",
        [this](RunConfig& c) { c.cost.t_train_quadratic = t_train_quad; });
    Add(cmd, "--t-comm", t_comm, "Seconds per mini-batch collective",
        [this](RunConfig& c) { c.cost.t_comm_per_minibatch = t_comm; });
    Add(cmd, "--t-sched", t_sched, "Seconds of scheduling per request",
        [this](RunConfig& c) { c.cost.t_sched_per_request = t_sched; });
    Add(cmd, "--t-sync", t_sync, "Seconds per weight sync", [this](RunConfig& c) { c.cost.t_weight_sync = t_sync; });
    Add(cmd, "--bsz", bsz, "Generate workloads with this many prompts per step",
        [this](RunConfig& c) { EnsureSample(c).batch_size = bsz; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--g", g, "Samples per prompt for generated workloads",
        [this](RunConfig& c) { EnsureSample(c).samples_per_prompt = g; })
        ->check(CLI::PositiveNumber);
    Add(cmd, "--selector", selector, "Source step selector: cycle | random | <step>",
        [this](RunConfig& c) { EnsureSample(c).step_selector = ParseSelectorFlag(selector); });
    Add(cmd, "--task", task, "Task type to draw from",
        [this](RunConfig& c) { EnsureSample(c).task_type = TaskType::FromString(task); });
  }

  static SampleSpec& EnsureSample(RunConfig& c) {
    if (!c.sample) c.sample = SampleSpec{};
    return *c.sample;
  }

  static StepSelector ParseSelectorFlag(const std::string& s) {
    if (s == "cycle") return StepSelector::Cycle();
    if (s == "random") return StepSelector::UniformRandom();
    try {
      size_t used = 0;
      const int64_t step = std::stoll(s, &used);
      if (used == s.size()) return StepSelector::Specific(step);
    } catch (const std::exception&) {
    }
    throw UsageError("--selector must be cycle, random or a step number");
  }

  void Apply(RunConfig& c) const {
    for (const auto& [opt, apply] : setters) {
      if (opt->count() > 0) apply(c);
    }
  }
};

RunConfig ResolveConfig(const GlobalFlags& global, const RunFlags* flags) {
  RunConfig c = DefaultRunConfig();
  if (!global.config_path.empty()) ApplyConfigFile(global.config_path, c);
  if (flags) flags->Apply(c);
  if (c.sample && global.seed_opt->count() > 0) c.sample->seed = global.seed;
  return c;
}

uint64_t EffectiveSeed(const GlobalFlags& global, const RunConfig& c) {
  if (global.seed_opt->count() > 0 || !c.sample) return global.seed;
  return c.sample->seed;
}

fs::path OutDir(const GlobalFlags& global) {
  fs::path dir(global.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string Dump(const Json& j) { return j.dump(2) + "\n"; }

int RunAnalyze(const GlobalFlags& global, const SourceFlags& source, const std::string& task, int bins,
               bool exclude_filtered) {
  if (bins < 1) throw UsageError("--bins must be at least 1");
  const Trace trace = source.Load(global.seed);
  AnalyzeOptions opts;
  if (!task.empty()) opts.task = TaskType::FromString(task);
  opts.bins = bins;
  opts.filter = exclude_filtered ? FilterMode::kExcludeFiltered : FilterMode::kIncludeFiltered;
  const std::string options_text = "task=" + task + ";bins=" + std::to_string(bins) +
                                   ";exclude_filtered=" + (exclude_filtered ? "1" : "0");
  ReportMetadata meta{"analyze", global.seed, Fnv1aHex(options_text)};
  const fs::path dir = OutDir(global);
  for (const auto& name : WriteAnalyzeReport(trace, opts, meta, dir)) std::cout << (dir / name).string() << "\n";
  return kExitOk;
}

int RunSample(const GlobalFlags& global, const SourceFlags& source, const RunFlags& flags) {
  RunConfig c = ResolveConfig(global, &flags);
  SampleSpec spec = c.sample.value_or(SampleSpec{});
  spec.seed = EffectiveSeed(global, c);
  if (c.steps > 0) spec.num_steps = c.steps;
  if (c.max_response_len) spec.max_response_len = c.max_response_len;
  c.sample = spec;
  const Trace trace = source.Load(spec.seed);
  const GeneratedWorkload w = SampleWorkload(trace, spec);
  const fs::path dir = OutDir(global);
  const bool csv = global.format == "csv";
  const fs::path workload = dir / (csv ? "workload.csv" : "workload.jsonl");
  WriteTrace(ToTrace(w), workload, csv ? TraceFormat::kCsv : TraceFormat::kJsonl);
  Json meta = ToJson(w, spec);
  meta["metadata"] = ToJson(ReportMetadata{"sample", spec.seed, ConfigDigest(c)});
  WriteTextFile(dir / "workload_meta.json", Dump(meta));
  int64_t n = 0;
  for (const auto& s : w.steps) n += static_cast<int64_t>(s.requests.size());
  std::cout << workload.string() << ": " << w.steps.size() << " steps, " << n << " requests\n";
  return kExitOk;
}

int RunSimulate(const GlobalFlags& global, const SourceFlags& source, const RunFlags& flags) {
  RunConfig c = ResolveConfig(global, &flags);
  const uint64_t seed = EffectiveSeed(global, c);
  const Trace trace = source.Load(seed);
  c.Validate();
  const std::vector<WorkloadStep> steps = BuildWorkload(trace, c);
  if (steps.empty()) throw SimError("workload has no steps");
  const RunResult run = SimulateRun(steps, c);
  if (auto violation = ValidateTimeline(run, c)) throw SimError("invalid timeline: " + *violation);

  const fs::path dir = OutDir(global);
  Json summary = ToJson(run, c);
  summary["metadata"] = ToJson(ReportMetadata{"simulate", seed, ConfigDigest(c)});
  WriteTextFile(dir / "run.json", Dump(summary));
  WriteTextFile(dir / "timeline.json", Dump(TimelineJson(run)));
  std::ostringstream gantt;
  WriteTimelineCsv(run, gantt);
  WriteTextFile(dir / "timeline.csv", gantt.str());
  if (global.format == "csv") {
    std::ostringstream table;
    WriteStepsCsv(run, table);
    WriteTextFile(dir / "steps.csv", table.str());
  } else {
    Json rows = Json::array();
    for (const auto& s : run.per_step) rows.push_back(ToJson(s));
    WriteTextFile(dir / "steps.json", Dump(rows));
  }
  std::cout << "mode=" << ToString(c.mode) << " steps=" << run.per_step.size()
            << " e2e_time=" << FormatNumber(run.e2e_time) << " mean_tgs=" << FormatNumber(run.mean_tgs)
            << " idle_fraction=" << FormatNumber(run.idle_fraction_overall) << "\n";
  return kExitOk;
}

std::vector<int64_t> ParseValues(const std::string& text) {
  std::vector<int64_t> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      values.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--values must be a comma-separated list of integers, got '" + item + "'");
    }
  }
  if (values.empty()) throw UsageError("--values must not be empty");
  return values;
}

int RunSweep(const GlobalFlags& global, const SourceFlags& source, const RunFlags& flags, const std::string& axis_name,
             const std::string& values_text) {
  const SweepAxis axis = ParseSweepAxis(axis_name);
  const std::vector<int64_t> values = ParseValues(values_text);
  const RunConfig c = ResolveConfig(global, &flags);
  const uint64_t seed = EffectiveSeed(global, c);
  const Trace trace = source.Load(seed);
  const std::vector<SweepRow> rows = Sweep(trace, c, axis, values);

  const fs::path dir = OutDir(global);
  if (global.format == "csv") {
    std::ostringstream table;
    WriteSweepCsv(rows, axis, table);
    WriteTextFile(dir / "sweep.csv", table.str());
  } else {
    Json doc;
    doc["metadata"] = ToJson(ReportMetadata{"sweep", seed, ConfigDigest(c)});
    doc["rows"] = ToJson(std::span<const SweepRow>(rows), axis);
    WriteTextFile(dir / "sweep.json", Dump(doc));
  }
  int failed = 0;
  for (const auto& r : rows) {
    if (r.ok) {
      std::cout << ToString(axis) << "=" << r.value << " e2e_time=" << FormatNumber(r.e2e_time) << "\n";
    } else {
      ++failed;
      std::cerr << ToString(axis) << "=" << r.value << " failed: " << r.error << "\n";
    }
  }
  return failed > 0 ? kExitSim : kExitOk;
}

int RunValidate(const GlobalFlags& global, const SourceFlags& source) {
  if (!global.config_path.empty()) {
    const RunConfig c = ResolveConfig(global, nullptr);
    c.Validate();
    std::cout << global.config_path << ": ok (digest " << ConfigDigest(c) << ")\n";
  }
  if (source.trace_path.empty() && source.synth.empty()) {
    if (global.config_path.empty()) throw UsageError("validate needs --trace, --synth or --config");
    return kExitOk;
  }
  const Trace trace = source.Load(global.seed);
  const auto steps = GroupByStep(trace);
  std::cout << (source.trace_path.empty() ? trace.source_name : source.trace_path) << ": ok, "
            << trace.records.size() << " records, " << steps.size() << " steps\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rlvrsim: RLVR workload characterization, generation and pipeline simulation"};
  app.set_version_flag("--version", std::string("rlvrsim ") + RLVRSIM_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  GlobalFlags global;
  global.seed_opt = app.add_option("--seed", global.seed, "Random seed");
  app.add_option("--config", global.config_path, "JSON config with sections cluster, cost, policies, sample, run");
  app.add_option("--out", global.out_dir, "Output directory")->capture_default_str();
  app.add_option("--format", global.format, "Table format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  SourceFlags analyze_src, sample_src, simulate_src, sweep_src, validate_src;
  RunFlags sample_flags, simulate_flags, sweep_flags;
  std::string analyze_task;
  int bins = kDefaultSimilarityBins;
  bool exclude_filtered = false;
  std::string axis, values;

  CLI::App* analyze = app.add_subcommand("analyze", "Characterize a trace: summary, CDF, similarity, trends");
  analyze_src.Register(analyze);
  analyze->add_option("--task", analyze_task, "Restrict to one task type");
  analyze->add_option("--bins", bins, "Histogram bins for step similarity")->capture_default_str();
  analyze->add_flag("--exclude-filtered", exclude_filtered, "Drop samples marked filtered");

  CLI::App* sample = app.add_subcommand("sample", "Generate a workload from a trace");
  sample_src.Register(sample);
  sample_flags.Register(sample);

  CLI::App* simulate = app.add_subcommand("simulate", "Simulate a multi-step run");
  simulate_src.Register(simulate);
  simulate_flags.Register(simulate);

  CLI::App* sweep = app.add_subcommand("sweep", "Run one simulation per axis value");
  sweep_src.Register(sweep);
  sweep_flags.Register(sweep);
  sweep->add_option("--axis", axis, "gpus | batch_size | max_response_len | staleness")
      ->required()
      ->check(CLI::IsMember({"gpus", "batch_size", "bsz", "max_response_len", "staleness"}));
  sweep->add_option("--values", values, "Comma-separated integers")->required();

  CLI::App* validate = app.add_subcommand("validate", "Check a trace and/or config file");
  validate_src.Register(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*analyze) return RunAnalyze(global, analyze_src, analyze_task, bins, exclude_filtered);
    if (*sample) return RunSample(global, sample_src, sample_flags);
    if (*simulate) return RunSimulate(global, simulate_src, simulate_flags);
    if (*sweep) return RunSweep(global, sweep_src, sweep_flags, axis, values);
    if (*validate) return RunValidate(global, validate_src);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TraceError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const StatsError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const GeneratorError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SimError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitSim;
  } catch (const BalanceError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitSim;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
