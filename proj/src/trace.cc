// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/trace.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace rlvrsim {
namespace {

using json = nlohmann::json;

constexpr std::array<std::pair<TaskType::Kind, std::string_view>, 6> kTaskLabels = {{
    {TaskType::Kind::kMathematics, "mathematics"},
    {TaskType::Kind::kProgramming, "programming"},
    {TaskType::Kind::kSearching, "searching"},
    {TaskType::Kind::kVideoUnderstanding, "video_understanding"},
    {TaskType::Kind::kImageUnderstanding, "image_understanding"},
    {TaskType::Kind::kToolUse, "tool_use"},
}};

enum class Column {
  kStep,
  kInputLen,
  kOutputLen,
  kType,
  kPromptId,
  kSampleId,
  kTurnCount,
  kToolLatencies,
  kFiltered,
  kUnknown,
};

constexpr std::array<std::pair<Column, std::string_view>, 9> kColumnNames = {{
    {Column::kStep, "step"},
    {Column::kInputLen, "input_len"},
    {Column::kOutputLen, "output_len"},
    {Column::kType, "type"},
    {Column::kPromptId, "prompt_id"},
    {Column::kSampleId, "sample_id"},
    {Column::kTurnCount, "turn_count"},
    {Column::kToolLatencies, "tool_latencies_ms"},
    {Column::kFiltered, "filtered"},
}};

Column ColumnFromName(std::string_view name) {
  for (const auto& [col, label] : kColumnNames) {
    if (label == name) return col;
  }
  return Column::kUnknown;
}

std::string_view ColumnName(Column col) {
  for (const auto& [c, label] : kColumnNames) {
    if (c == col) return label;
  }
  return "unknown";
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<int64_t> ParseInt(std::string_view s) {
  s = Trim(s);
  int64_t value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

std::optional<double> ParseDouble(std::string_view s) {
  s = Trim(s);
  double value = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<bool> ParseBool(std::string_view s) {
  s = Trim(s);
  if (s == "true" || s == "1" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "0" || s == "False" || s == "FALSE") return false;
  return std::nullopt;
}

void AppendDouble(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

void AppendInt(std::string& out, int64_t v) {
  std::array<char, 24> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

// RFC 4180 splitting of one physical line. Quoted fields may contain commas
// and doubled quotes but not line breaks.
bool SplitCsvLine(std::string_view line, std::vector<std::string>& cells) {
  cells.clear();
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && Trim(cur).empty() && !was_quoted) {
      cur.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cur : std::string(Trim(cur)));
      cur.clear();
      was_quoted = false;
    } else if (c == '\r' && i + 1 == line.size()) {
      // tolerate CRLF
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) return false;
  cells.push_back(was_quoted ? cur : std::string(Trim(cur)));
  return true;
}

void AppendCsvCell(std::string& out, std::string_view cell) {
  const auto blank = [](char c) { return c == ' ' || c == '\t'; };
  const bool needs_quotes = cell.find_first_of(",\"") != std::string_view::npos ||
                            (!cell.empty() && (blank(cell.front()) || blank(cell.back())));
  if (!needs_quotes) {
    out.append(cell);
    return;
  }
  out.push_back('"');
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

// Empty list present: "[]". Absent: empty cell.
std::optional<std::vector<double>> ParseLatencyList(std::string_view cell) {
  cell = Trim(cell);
  if (cell == "[]") return std::vector<double>{};
  std::vector<double> out;
  size_t start = 0;
  while (start <= cell.size()) {
    size_t end = cell.find(';', start);
    if (end == std::string_view::npos) end = cell.size();
    auto v = ParseDouble(cell.substr(start, end - start));
    if (!v) return std::nullopt;
    out.push_back(*v);
    start = end + 1;
  }
  return out;
}

void ValidateOrThrow(const TraceRecord& rec, int64_t line) {
  if (auto violation = rec.Violation()) {
    throw TraceError("line " + std::to_string(line) + ": invalid record: " + *violation, line,
                     "record");
  }
}

[[noreturn]] void ThrowField(int64_t line, std::string_view field, std::string_view value) {
  throw TraceError("line " + std::to_string(line) + ": malformed field '" + std::string(field) +
                       "': '" + std::string(value) + "'",
                   line, std::string(field));
}

TaskType ParseType(std::string_view label, int64_t line, ParseWarnings* warnings) {
  if (label.empty()) ThrowField(line, "type", label);
  TaskType t = TaskType::FromString(label);
  if (t.is_other() && warnings) ++warnings->unknown_task_types;
  return t;
}

Trace ReadCsv(std::istream& in, ParseWarnings* warnings) {
  Trace trace;
  std::string line;
  int64_t line_no = 0;
  std::vector<Column> columns;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::vector<std::string> cells;
    if (!SplitCsvLine(line, cells)) throw TraceError("line " + std::to_string(line_no) + ": unterminated quote in header", line_no, "header");
    for (const auto& c : cells) {
      Column col = ColumnFromName(c);
      if (col == Column::kUnknown && warnings) {
        ++warnings->unknown_columns;
        warnings->unknown_column_names.push_back(c);
      }
      columns.push_back(col);
    }
    have_header = true;
  }
  if (!have_header) throw TraceError("missing CSV header", 0, "header");
  for (Column required : {Column::kStep, Column::kInputLen, Column::kOutputLen, Column::kType}) {
    if (std::find(columns.begin(), columns.end(), required) == columns.end()) {
      throw TraceError("CSV header lacks required column '" + std::string(ColumnName(required)) + "'",
                       line_no, std::string(ColumnName(required)));
    }
  }

  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    if (!SplitCsvLine(line, cells)) ThrowField(line_no, "row", "unterminated quote");
    if (cells.size() != columns.size()) {
      throw TraceError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(columns.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, "row");
    }
    TraceRecord rec;
    for (size_t i = 0; i < columns.size(); ++i) {
      const std::string& cell = cells[i];
      const Column col = columns[i];
      auto int_field = [&](std::string_view name) {
        auto v = ParseInt(cell);
        if (!v) ThrowField(line_no, name, cell);
        return *v;
      };
      switch (col) {
        case Column::kStep: rec.step = int_field("step"); break;
        case Column::kInputLen: rec.input_len = int_field("input_len"); break;
        case Column::kOutputLen: rec.output_len = int_field("output_len"); break;
        case Column::kType: rec.task_type = ParseType(cell, line_no, warnings); break;
        case Column::kPromptId:
          if (!cell.empty()) rec.prompt_id = cell;
          break;
        case Column::kSampleId:
          if (!Trim(cell).empty()) rec.sample_id = int_field("sample_id");
          break;
        case Column::kTurnCount:
          if (!Trim(cell).empty()) rec.turn_count = int_field("turn_count");
          break;
        case Column::kToolLatencies:
          if (!Trim(cell).empty()) {
            auto v = ParseLatencyList(cell);
            if (!v) ThrowField(line_no, "tool_latencies_ms", cell);
            rec.tool_latencies_ms = std::move(*v);
          }
          break;
        case Column::kFiltered:
          if (!Trim(cell).empty()) {
            auto v = ParseBool(cell);
            if (!v) ThrowField(line_no, "filtered", cell);
            rec.filtered = *v;
          }
          break;
        case Column::kUnknown: break;
      }
    }
    ValidateOrThrow(rec, line_no);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

int64_t JsonInt(const json& j, std::string_view key, int64_t line) {
  if (j.is_number_integer()) return j.get<int64_t>();
  if (j.is_number_float()) {
    double d = j.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15) return static_cast<int64_t>(d);
  }
  ThrowField(line, key, j.dump());
}

Trace ReadJsonl(std::istream& in, ParseWarnings* warnings) {
  Trace trace;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw TraceError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what(), line_no, "row");
    }
    if (!obj.is_object()) ThrowField(line_no, "row", Trim(line));
    for (std::string_view required : {"step", "input_len", "output_len", "type"}) {
      if (!obj.contains(required)) {
        throw TraceError("line " + std::to_string(line_no) + ": missing key '" + std::string(required) + "'",
                         line_no, std::string(required));
      }
    }
    TraceRecord rec;
    for (const auto& [key, value] : obj.items()) {
      switch (ColumnFromName(key)) {
        case Column::kStep: rec.step = JsonInt(value, key, line_no); break;
        case Column::kInputLen: rec.input_len = JsonInt(value, key, line_no); break;
        case Column::kOutputLen: rec.output_len = JsonInt(value, key, line_no); break;
        case Column::kType:
          if (!value.is_string()) ThrowField(line_no, key, value.dump());
          rec.task_type = ParseType(value.get<std::string>(), line_no, warnings);
          break;
        case Column::kPromptId:
          if (value.is_string()) {
            rec.prompt_id = value.get<std::string>();
          } else if (value.is_number_integer()) {
            rec.prompt_id = std::to_string(value.get<int64_t>());
          } else if (!value.is_null()) {
            ThrowField(line_no, key, value.dump());
          }
          break;
        case Column::kSampleId:
          if (!value.is_null()) rec.sample_id = JsonInt(value, key, line_no);
          break;
        case Column::kTurnCount:
          if (!value.is_null()) rec.turn_count = JsonInt(value, key, line_no);
          break;
        case Column::kToolLatencies:
          if (value.is_null()) break;
          if (!value.is_array()) ThrowField(line_no, key, value.dump());
          rec.tool_latencies_ms.emplace();
          for (const auto& v : value) {
            if (!v.is_number()) ThrowField(line_no, key, value.dump());
            rec.tool_latencies_ms->push_back(v.get<double>());
          }
          break;
        case Column::kFiltered:
          if (value.is_boolean()) {
            rec.filtered = value.get<bool>();
          } else if (value.is_number_integer() && (value == 0 || value == 1)) {
            rec.filtered = value.get<int>() == 1;
          } else if (!value.is_null()) {
            ThrowField(line_no, key, value.dump());
          }
          break;
        case Column::kUnknown:
          if (warnings) {
            ++warnings->unknown_columns;
            if (std::find(warnings->unknown_column_names.begin(), warnings->unknown_column_names.end(), key) ==
                warnings->unknown_column_names.end()) {
              warnings->unknown_column_names.push_back(key);
            }
          }
          break;
      }
    }
    ValidateOrThrow(rec, line_no);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

struct PresentColumns {
  bool prompt_id = false;
  bool sample_id = false;
  bool turn_count = false;
  bool tool_latencies = false;
  bool filtered = false;
};

PresentColumns ScanColumns(const Trace& trace) {
  PresentColumns p;
  for (const auto& r : trace.records) {
    p.prompt_id |= r.prompt_id.has_value();
    p.sample_id |= r.sample_id.has_value();
    p.turn_count |= r.turn_count.has_value();
    p.tool_latencies |= r.tool_latencies_ms.has_value();
    p.filtered |= r.filtered;
  }
  return p;
}

void WriteCsv(const Trace& trace, std::ostream& out) {
  const PresentColumns p = ScanColumns(trace);
  std::string buf = "step,input_len,output_len,type";
  if (p.prompt_id) buf += ",prompt_id";
  if (p.sample_id) buf += ",sample_id";
  if (p.turn_count) buf += ",turn_count";
  if (p.tool_latencies) buf += ",tool_latencies_ms";
  if (p.filtered) buf += ",filtered";
  buf += '\n';
  for (const auto& r : trace.records) {
    AppendInt(buf, r.step);
    buf += ',';
    AppendInt(buf, r.input_len);
    buf += ',';
    AppendInt(buf, r.output_len);
    buf += ',';
    AppendCsvCell(buf, r.task_type.ToString());
    if (p.prompt_id) {
      buf += ',';
      if (r.prompt_id) AppendCsvCell(buf, *r.prompt_id);
    }
    if (p.sample_id) {
      buf += ',';
      if (r.sample_id) AppendInt(buf, *r.sample_id);
    }
    if (p.turn_count) {
      buf += ',';
      if (r.turn_count) AppendInt(buf, *r.turn_count);
    }
    if (p.tool_latencies) {
      buf += ',';
      if (r.tool_latencies_ms) {
        if (r.tool_latencies_ms->empty()) buf += "[]";
        for (size_t i = 0; i < r.tool_latencies_ms->size(); ++i) {
          if (i) buf += ';';
          AppendDouble(buf, (*r.tool_latencies_ms)[i]);
        }
      }
    }
    if (p.filtered) buf += r.filtered ? ",true" : ",false";
    buf += '\n';
    if (buf.size() > (1u << 16)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void WriteJsonl(const Trace& trace, std::ostream& out) {
  std::string buf;
  for (const auto& r : trace.records) {
    buf += "{\"step\":";
    AppendInt(buf, r.step);
    buf += ",\"input_len\":";
    AppendInt(buf, r.input_len);
    buf += ",\"output_len\":";
    AppendInt(buf, r.output_len);
    buf += ",\"type\":";
    buf += json(r.task_type.ToString()).dump();
    if (r.prompt_id) {
      buf += ",\"prompt_id\":";
      buf += json(*r.prompt_id).dump();
    }
    if (r.sample_id) {
      buf += ",\"sample_id\":";
      AppendInt(buf, *r.sample_id);
    }
    if (r.turn_count) {
      buf += ",\"turn_count\":";
      AppendInt(buf, *r.turn_count);
    }
    if (r.tool_latencies_ms) {
      buf += ",\"tool_latencies_ms\":[";
      for (size_t i = 0; i < r.tool_latencies_ms->size(); ++i) {
        if (i) buf += ',';
        AppendDouble(buf, (*r.tool_latencies_ms)[i]);
      }
      buf += ']';
    }
    if (r.filtered) buf += ",\"filtered\":true";
    buf += "}\n";
    if (buf.size() > (1u << 16)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace

TaskType TaskType::FromString(std::string_view label) {
  for (const auto& [kind, name] : kTaskLabels) {
    if (name == label) return TaskType(kind);
  }
  TaskType t(Kind::kOther);
  t.other_name_ = std::string(label);
  return t;
}

std::string TaskType::ToString() const {
  if (kind_ == Kind::kOther) return other_name_;
  for (const auto& [kind, name] : kTaskLabels) {
    if (kind == kind_) return std::string(name);
  }
  return "other";
}

std::optional<std::string> TraceRecord::Violation() const {
  if (step < 0) return "step must be non-negative";
  if (input_len < 0) return "input_len must be non-negative";
  if (output_len < 0) return "output_len must be non-negative";
  if (task_type.is_other()) {
    const std::string name = task_type.ToString();
    if (name.empty()) return "task type must be non-empty";
    if (name.find_first_of("\r\n") != std::string::npos) return "task type contains a line break";
  }
  if (prompt_id) {
    if (prompt_id->empty()) return "prompt_id must be non-empty when present";
    if (prompt_id->find_first_of("\r\n") != std::string::npos) return "prompt_id contains a line break";
  }
  if (sample_id) {
    if (!prompt_id) return "sample_id requires prompt_id";
    if (*sample_id < 0) return "sample_id must be non-negative";
  }
  if (turn_count && *turn_count < 1) return "turn_count must be >= 1";
  if (tool_latencies_ms) {
    for (double v : *tool_latencies_ms) {
      if (!std::isfinite(v) || v < 0) return "tool latencies must be finite and non-negative";
    }
  }
  return std::nullopt;
}

double TraceRecord::total_tool_latency_ms() const {
  if (!tool_latencies_ms) return 0.0;
  return std::accumulate(tool_latencies_ms->begin(), tool_latencies_ms->end(), 0.0);
}

TraceFormat FormatFromPath(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return TraceFormat::kJsonl;
  return TraceFormat::kCsv;
}

TraceFormat ParseTraceFormat(std::string_view name) {
  if (name == "csv") return TraceFormat::kCsv;
  if (name == "jsonl" || name == "json") return TraceFormat::kJsonl;
  throw std::invalid_argument("unknown trace format '" + std::string(name) + "'");
}

Trace ReadTrace(std::istream& in, TraceFormat format, ParseWarnings* warnings) {
  return format == TraceFormat::kCsv ? ReadCsv(in, warnings) : ReadJsonl(in, warnings);
}

Trace ParseTrace(const std::filesystem::path& path, TraceFormat format, ParseWarnings* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace file '" + path.string() + "'", 0, "path");
  try {
    Trace trace = ReadTrace(in, format, warnings);
    trace.source_name = path.filename().string();
    return trace;
  } catch (const TraceError& e) {
    throw TraceError(path.string() + ": " + e.what(), e.line(), e.field());
  }
}

void WriteTrace(const Trace& trace, std::ostream& out, TraceFormat format) {
  if (format == TraceFormat::kCsv) {
    WriteCsv(trace, out);
  } else {
    WriteJsonl(trace, out);
  }
}

void WriteTrace(const Trace& trace, const std::filesystem::path& path, TraceFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  WriteTrace(trace, out, format);
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<WorkloadStep> GroupByStep(const Trace& trace) {
  std::map<int64_t, std::vector<TraceRecord>> by_step;
  for (const auto& r : trace.records) by_step[r.step].push_back(r);
  std::vector<WorkloadStep> steps;
  steps.reserve(by_step.size());
  for (auto& [step, reqs] : by_step) steps.push_back(WorkloadStep{step, std::move(reqs)});
  return steps;
}

Trace FilterByTask(const Trace& trace, const TaskType& task) {
  Trace out;
  out.source_name = trace.source_name;
  out.token_unit = trace.token_unit;
  std::copy_if(trace.records.begin(), trace.records.end(), std::back_inserter(out.records),
               [&](const TraceRecord& r) { return r.task_type == task; });
  return out;
}

std::vector<TraceRecord> Unfiltered(std::span<const TraceRecord> records) {
  std::vector<TraceRecord> out;
  out.reserve(records.size());
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const TraceRecord& r) { return !r.filtered; });
  return out;
}

}  // namespace rlvrsim
