// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/report.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "rlvrsim/config.h"
#include "rlvrsim/rng.h"

namespace rlvrsim {
namespace {

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <typename T>
Json OptionalJson(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

void SummaryCsvCells(std::ostream& out, const SummaryStats& s) {
  out << s.count << ',' << FormatNumber(s.mean) << ',' << FormatNumber(s.stddev) << ',' << FormatNumber(s.min)
      << ',' << FormatNumber(s.p50) << ',' << FormatNumber(s.p90) << ',' << FormatNumber(s.p95) << ','
      << FormatNumber(s.p99) << ',' << FormatNumber(s.max);
}

bool HasPromptIds(const Trace& trace) {
  for (const auto& r : trace.records) {
    if (r.prompt_id) return true;
  }
  return false;
}

const LengthKind kAllKinds[] = {LengthKind::kInput, LengthKind::kOutput, LengthKind::kTurns,
                                LengthKind::kToolLatency};
const LengthKind kTableKinds[] = {LengthKind::kInput, LengthKind::kOutput};

}  // namespace

std::string FormatNumber(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Json ToJson(const ReportMetadata& meta) {
  return {{"tool", "rlvrsim"},
          {"version", RLVRSIM_VERSION},
          {"command", meta.command},
          {"seed", meta.seed},
          {"config_digest", meta.config_digest}};
}

Json ToJson(const SummaryStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.stddev}, {"min", s.min}, {"p50", s.p50},
          {"p90", s.p90},     {"p95", s.p95},   {"p99", s.p99},    {"max", s.max}};
}

Json ToJson(const Assignment& a) {
  return {{"rank_of", a.rank_of},
          {"rank_loads", a.rank_loads},
          {"makespan_tokens", a.makespan_tokens},
          {"imbalance_ratio", ImbalanceRatio(a)}};
}

Json ToJson(const StepSimResult& s) {
  return {{"step", s.step},
          {"rollout_time", s.rollout_time},
          {"inference_time", s.inference_time},
          {"train_time", s.train_time},
          {"tool_time", s.tool_time},
          {"total_time", s.total_time},
          {"rollout_rank_busy", s.rollout_rank_busy},
          {"inference_rank_busy", s.inference_rank_busy},
          {"train_rank_busy", s.train_rank_busy},
          {"rollout_idle_fraction", s.rollout_idle_fraction},
          {"inference_idle_fraction", s.inference_idle_fraction},
          {"train_idle_fraction", s.train_idle_fraction},
          {"idle_fraction", s.idle_fraction},
          {"per_minibatch_tgs", s.per_minibatch_tgs},
          {"rollout_tgs", s.rollout_tgs},
          {"train_tgs", s.train_tgs},
          {"tokens", s.tokens},
          {"train_tokens", s.train_tokens},
          {"preemption_events", s.preemption_events},
          {"recomputed_tokens", s.recomputed_tokens}};
}

Json ToJson(const RunResult& run, const RunConfig& config) {
  Json steps = Json::array();
  for (const auto& s : run.per_step) steps.push_back(ToJson(s));
  return {{"mode", ToString(config.mode)},
          {"max_staleness", config.max_staleness},
          {"config", Json::parse(CanonicalConfigJson(config))},
          {"steps", run.per_step.size()},
          {"e2e_time", run.e2e_time},
          {"mean_tgs", run.mean_tgs},
          {"idle_fraction_overall", run.idle_fraction_overall},
          {"weight_syncs", run.weight_syncs},
          {"rollout_version", run.rollout_version},
          {"per_step", std::move(steps)}};
}

Json TimelineJson(const RunResult& run) {
  Json out = Json::array();
  for (const auto& iv : run.timeline) {
    out.push_back({{"pool", iv.pool}, {"stage", ToString(iv.stage)}, {"step", iv.step}, {"start", iv.start},
                   {"end", iv.end}});
  }
  return out;
}

Json ToJson(const GeneratedWorkload& w, const SampleSpec& spec) {
  Json selector;
  switch (spec.step_selector.kind) {
    case StepSelector::Kind::kSpecific: selector = spec.step_selector.step; break;
    case StepSelector::Kind::kCycle: selector = "cycle"; break;
    case StepSelector::Kind::kUniformRandom: selector = "random"; break;
  }
  int64_t truncated_total = 0;
  for (int64_t t : w.truncated) truncated_total += t;
  return {{"rng", Rng::kAlgorithm},
          {"seed", spec.seed},
          {"spec",
           {{"batch_size", spec.batch_size},
            {"samples_per_prompt", spec.samples_per_prompt},
            {"task_type", spec.task_type.ToString()},
            {"step_selector", selector},
            {"num_steps", spec.num_steps},
            {"max_response_len", OptionalJson(spec.max_response_len)},
            {"with_replacement", spec.with_replacement}}},
          {"prompt_grouped", w.prompt_grouped},
          {"source_steps", w.source_steps},
          {"truncated", w.truncated},
          {"truncated_total", truncated_total}};
}

Json ToJson(std::span<const SweepRow> rows, SweepAxis axis) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json row = {{"axis", ToString(axis)}, {"value", r.value}, {"ok", r.ok}};
    if (r.ok) {
      row["steps"] = r.steps;
      row["e2e_time"] = r.e2e_time;
      row["mean_tgs"] = r.mean_tgs;
      row["idle_fraction"] = r.idle_fraction;
      row["mean_rollout_time"] = r.mean_rollout_time;
      row["mean_train_time"] = r.mean_train_time;
    } else {
      row["error"] = r.error;
    }
    out.push_back(std::move(row));
  }
  return out;
}

void WriteTimelineCsv(const RunResult& run, std::ostream& out) {
  out << "pool,stage,step,start,end\n";
  for (const auto& iv : run.timeline) {
    out << iv.pool << ',' << ToString(iv.stage) << ',' << iv.step << ',' << FormatNumber(iv.start) << ','
        << FormatNumber(iv.end) << '\n';
  }
}

void WriteStepsCsv(const RunResult& run, std::ostream& out) {
  out << "step,rollout_s,inference_s,train_s,tool_s,idle_frac,tgs\n";
  for (size_t i = 0; i < run.per_step.size(); ++i) {
    const StepSimResult& s = run.per_step[i];
    out << i << ',' << FormatNumber(s.rollout_time) << ',' << FormatNumber(s.inference_time) << ','
        << FormatNumber(s.train_time) << ',' << FormatNumber(s.tool_time) << ',' << FormatNumber(s.idle_fraction)
        << ',' << FormatNumber(s.train_tgs) << '\n';
  }
}

void WriteSweepCsv(std::span<const SweepRow> rows, SweepAxis axis, std::ostream& out) {
  out << ToString(axis) << ",ok,steps,e2e_s,mean_tgs,idle_frac,mean_rollout_s,mean_train_s,error\n";
  for (const auto& r : rows) {
    out << r.value << ',' << (r.ok ? "true" : "false") << ',';
    if (r.ok) {
      out << r.steps << ',' << FormatNumber(r.e2e_time) << ',' << FormatNumber(r.mean_tgs) << ','
          << FormatNumber(r.idle_fraction) << ',' << FormatNumber(r.mean_rollout_time) << ','
          << FormatNumber(r.mean_train_time) << ",\n";
    } else {
      out << ",,,,,," << CsvField(r.error) << '\n';
    }
  }
}

std::vector<std::string> WriteAnalyzeReport(const Trace& source, const AnalyzeOptions& options,
                                            const ReportMetadata& meta, const std::filesystem::path& dir) {
  const Trace trace = options.task ? FilterByTask(source, *options.task) : source;
  const LengthDistribution outputs = ExtractLengths(trace.records, LengthKind::kOutput, options.filter);
  if (outputs.values.empty()) {
    throw StatsError(options.task ? "no records for task type '" + options.task->ToString() + "'"
                                  : std::string("trace has no records to analyze"));
  }
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  Json summary;
  summary["metadata"] = ToJson(meta);
  int64_t filtered = 0;
  std::map<int64_t, int64_t> per_step;
  for (const auto& r : trace.records) {
    filtered += r.filtered ? 1 : 0;
    ++per_step[r.step];
  }
  summary["trace"] = {{"source", trace.source_name},
                      {"records", trace.records.size()},
                      {"steps", per_step.size()},
                      {"filtered_records", filtered},
                      {"task", options.task ? Json(options.task->ToString()) : Json(nullptr)},
                      {"exclude_filtered", options.filter == FilterMode::kExcludeFiltered}};
  Json lengths = Json::object();
  for (LengthKind kind : kAllKinds) {
    const LengthDistribution d = ExtractLengths(trace.records, kind, options.filter);
    if (!d.values.empty()) lengths[ToString(kind)] = ToJson(Summary(d));
  }
  summary["lengths"] = std::move(lengths);

  const std::vector<TraceRecord> used =
      options.filter == FilterMode::kExcludeFiltered ? Unfiltered(trace.records) : trace.records;
  summary["correlation"] = {{"pearson_raw", OptionalJson(JointCorrelation(used, CorrelationScale::kRaw))},
                            {"pearson_log1p", OptionalJson(JointCorrelation(used, CorrelationScale::kLog1p))}};

  std::map<std::string, std::vector<TraceRecord>> by_task;
  for (const auto& r : used) by_task[r.task_type.ToString()].push_back(r);
  Json tasks = Json::object();
  for (const auto& [label, records] : by_task) {
    tasks[label] = {{"records", records.size()},
                    {"input", ToJson(Summary(ExtractLengths(records, LengthKind::kInput)))},
                    {"output", ToJson(Summary(ExtractLengths(records, LengthKind::kOutput)))}};
  }
  summary["tasks"] = std::move(tasks);

  const StepSimilarityMatrix sim = StepSimilarity(trace, LengthKind::kOutput, options.bins, options.filter);
  summary["similarity"] = {{"kind", "output"},
                           {"bins", options.bins},
                           {"steps", sim.steps.size()},
                           {"skipped_steps", sim.skipped_steps}};

  const bool grouped = HasPromptIds(trace);
  std::ostringstream groups_csv;
  if (grouped) {
    groups_csv << "step,prompt_id,samples,mean,std,cv,undersampled\n";
    std::vector<PromptGroupStats> all;
    for (const auto& ws : GroupByStep(trace)) {
      if (std::none_of(ws.requests.begin(), ws.requests.end(), [](const auto& r) { return r.prompt_id.has_value(); })) {
        continue;
      }
      std::vector<PromptGroupStats> groups = PromptGroups(ws);
      for (const auto& g : groups) {
        groups_csv << ws.step << ',' << CsvField(g.prompt_id) << ',' << g.sample_lengths.size() << ','
                   << FormatNumber(g.mean) << ',' << FormatNumber(g.stddev) << ','
                   << (g.coefficient_of_variation ? FormatNumber(*g.coefficient_of_variation) : "") << ','
                   << (g.undersampled ? "true" : "false") << '\n';
      }
      all.insert(all.end(), std::make_move_iterator(groups.begin()), std::make_move_iterator(groups.end()));
    }
    const PromptClustering pc = SummarizePromptGroups(all);
    summary["prompt_clustering"] = {
        {"groups", pc.groups}, {"median_within_cv", pc.median_within_cv}, {"between_cv", pc.between_cv}};
  }

  WriteTextFile(dir / "summary.json", summary.dump(2) + "\n");
  written.push_back("summary.json");

  std::ostringstream cdf;
  cdf << "kind,value,cumulative_fraction\n";
  for (LengthKind kind : kTableKinds) {
    const LengthDistribution d = ExtractLengths(trace.records, kind, options.filter);
    for (const auto& p : EmpiricalCdf(d)) {
      cdf << ToString(kind) << ',' << FormatNumber(p.value) << ',' << FormatNumber(p.cumulative_fraction) << '\n';
    }
  }
  WriteTextFile(dir / "cdf.csv", cdf.str());
  written.push_back("cdf.csv");

  std::ostringstream simcsv;
  simcsv << "step";
  for (int64_t s : sim.steps) simcsv << ',' << s;
  simcsv << '\n';
  for (size_t i = 0; i < sim.size(); ++i) {
    simcsv << sim.steps[i];
    for (size_t j = 0; j < sim.size(); ++j) simcsv << ',' << FormatNumber(sim(i, j));
    simcsv << '\n';
  }
  WriteTextFile(dir / "similarity.csv", simcsv.str());
  written.push_back("similarity.csv");

  std::ostringstream trends;
  trends << "kind,step,count,mean,std,min,p50,p90,p95,p99,max\n";
  for (LengthKind kind : kTableKinds) {
    for (const auto& row : TemporalTrend(trace, kind, options.filter)) {
      trends << ToString(kind) << ',' << row.step << ',';
      SummaryCsvCells(trends, row.stats);
      trends << '\n';
    }
  }
  WriteTextFile(dir / "trends.csv", trends.str());
  written.push_back("trends.csv");

  if (grouped) {
    WriteTextFile(dir / "prompt_groups.csv", groups_csv.str());
    written.push_back("prompt_groups.csv");
  }
  return written;
}

}  // namespace rlvrsim
