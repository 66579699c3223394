// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlvrsim {

/// Task category of a rollout sample. Known categories map to an enumerator;
/// anything else is carried verbatim as Kind::kOther.
class TaskType {
 public:
  enum class Kind {
    kMathematics,
    kProgramming,
    kSearching,
    kVideoUnderstanding,
    kImageUnderstanding,
    kToolUse,
    kOther,
  };

  TaskType() = default;
  TaskType(Kind kind) : kind_(kind) {}  // NOLINT(google-explicit-constructor)

  /// Canonicalizing constructor: a known label yields its enumerator.
  static TaskType FromString(std::string_view label);
  static TaskType Other(std::string name) { return FromString(name); }

  Kind kind() const { return kind_; }
  bool is_other() const { return kind_ == Kind::kOther; }
  std::string ToString() const;

  friend bool operator==(const TaskType&, const TaskType&) = default;

 private:
  Kind kind_ = Kind::kMathematics;
  std::string other_name_;
};

/// Lengths and labels of one rollout sample.
struct TraceRecord {
  int64_t step = 0;
  int64_t input_len = 0;
  int64_t output_len = 0;
  TaskType task_type;
  std::optional<std::string> prompt_id;
  std::optional<int64_t> sample_id;
  std::optional<int64_t> turn_count;
  std::optional<std::vector<double>> tool_latencies_ms;
  bool filtered = false;

  /// Empty when the record satisfies every invariant; otherwise a description
  /// of the first violation.
  std::optional<std::string> Violation() const;

  double total_tool_latency_ms() const;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::string source_name;
  std::string token_unit = "tokens";
};

/// Requests of one global step; modeled as arriving simultaneously, in
/// file order (the FCFS arrival order).
struct WorkloadStep {
  int64_t step = 0;
  std::vector<TraceRecord> requests;
};

enum class TraceFormat { kCsv, kJsonl };

/// Infers the format from a file extension (.csv, .jsonl, .json).
TraceFormat FormatFromPath(const std::filesystem::path& path);
TraceFormat ParseTraceFormat(std::string_view name);

/// Malformed or invalid trace input. line is 1-based; 0 when not tied to a line.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, int64_t line = 0, std::string field = {})
      : std::runtime_error(what), line_(line), field_(std::move(field)) {}

  int64_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int64_t line_;
  std::string field_;
};

struct ParseWarnings {
  int64_t unknown_columns = 0;
  int64_t unknown_task_types = 0;
  std::vector<std::string> unknown_column_names;
};

Trace ReadTrace(std::istream& in, TraceFormat format, ParseWarnings* warnings = nullptr);
Trace ParseTrace(const std::filesystem::path& path, TraceFormat format,
                 ParseWarnings* warnings = nullptr);

void WriteTrace(const Trace& trace, std::ostream& out, TraceFormat format);
void WriteTrace(const Trace& trace, const std::filesystem::path& path, TraceFormat format);

/// Records grouped by step, steps ascending, file order preserved within a step.
std::vector<WorkloadStep> GroupByStep(const Trace& trace);

/// Records of one task type, in order.
Trace FilterByTask(const Trace& trace, const TaskType& task);

/// Copies of records with filtered == false.
std::vector<TraceRecord> Unfiltered(std::span<const TraceRecord> records);

}  // namespace rlvrsim
