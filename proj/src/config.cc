// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlvrsim/config.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rlvrsim {
namespace {

using nlohmann::json;

void CheckKeys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + name + "." + key + "'");
  }
}

template <typename T>
void Read(const json& section, const std::string& section_name, const char* key, T& out) {
  auto it = section.find(key);
  if (it == section.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + section_name + "." + key + "'");
  }
}

template <typename T>
void ReadOptional(const json& section, const std::string& section_name, const char* key,
                  std::optional<T>& out) {
  auto it = section.find(key);
  if (it == section.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  Read(section, section_name, key, v);
  out = v;
}

template <typename Parse>
void ReadEnum(const json& section, const std::string& section_name, const char* key, Parse parse) {
  auto it = section.find(key);
  if (it == section.end()) return;
  if (!it->is_string()) throw ConfigError("'" + section_name + "." + key + "' must be a string");
  try {
    parse(it->get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section_name + "." + key + ": " + e.what());
  }
}

StepSelector ParseSelector(const json& v) {
  if (v.is_number_integer()) return StepSelector::Specific(v.get<int64_t>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "cycle") return StepSelector::Cycle();
    if (s == "random" || s == "uniform_random") return StepSelector::UniformRandom();
  }
  throw ConfigError("sample.step_selector must be \"cycle\", \"random\" or a step number");
}

json SelectorJson(const StepSelector& s) {
  switch (s.kind) {
    case StepSelector::Kind::kSpecific: return s.step;
    case StepSelector::Kind::kCycle: return "cycle";
    case StepSelector::Kind::kUniformRandom: return "random";
  }
  return nullptr;
}

template <typename T>
json OptionalJson(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void SetMode(RunConfig& config, RunMode mode) {
  config.mode = mode;
  config.cluster.colocated = mode == RunMode::kSyncColocated;
}

RunConfig DefaultRunConfig() {
  RunConfig c;
  c.cost.t_prefill_per_token = 2e-5;
  c.cost.t_decode_per_token = 0.02;
  c.cost.t_train_per_token = 1e-4;
  c.cost.t_comm_per_minibatch = 0.5;
  c.cost.t_sched_per_request = 1e-3;
  c.cost.t_weight_sync = 5.0;
  return c;
}

std::string Fnv1aHex(std::string_view text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ApplyConfigJson(const std::string& text, RunConfig& config) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  CheckKeys(doc, "config", {"cluster", "cost", "policies", "sample", "run"});

  if (auto it = doc.find("cluster"); it != doc.end()) {
    const json& c = *it;
    CheckKeys(c, "cluster", {"rollout_ranks", "train_ranks", "kv_capacity_tokens"});
    Read(c, "cluster", "rollout_ranks", config.cluster.rollout_ranks);
    Read(c, "cluster", "train_ranks", config.cluster.train_ranks);
    ReadOptional(c, "cluster", "kv_capacity_tokens", config.cluster.kv_capacity_tokens);
  }
  if (auto it = doc.find("cost"); it != doc.end()) {
    const json& c = *it;
    CheckKeys(c, "cost",
              {"t_prefill_per_token", "t_decode_per_token", "t_train_per_token", "t_train_quadratic",
               "t_comm_per_minibatch", "t_sched_per_request", "t_weight_sync"});
    CostModel& m = config.cost;
    Read(c, "cost", "t_prefill_per_token", m.t_prefill_per_token);
    Read(c, "cost", "t_decode_per_token", m.t_decode_per_token);
    Read(c, "cost", "t_train_per_token", m.t_train_per_token);
    Read(c, "cost", "t_train_quadratic", m.t_train_quadratic);
    Read(c, "cost", "t_comm_per_minibatch", m.t_comm_per_minibatch);
    Read(c, "cost", "t_sched_per_request", m.t_sched_per_request);
    Read(c, "cost", "t_weight_sync", m.t_weight_sync);
  }
  if (auto it = doc.find("policies"); it != doc.end()) {
    const json& c = *it;
    CheckKeys(c, "policies",
              {"rollout_policy", "rollout_weight", "train_policy", "train_weight", "tool_mode", "victim",
               "inference_factor", "minibatches", "drop_filtered_for_training"});
    SimPolicies& p = config.policies;
    ReadEnum(c, "policies", "rollout_policy", [&](const std::string& s) { p.rollout_policy = ParseBalancePolicy(s); });
    ReadEnum(c, "policies", "rollout_weight", [&](const std::string& s) { p.rollout_weight = ParseBalanceWeight(s); });
    ReadEnum(c, "policies", "train_policy", [&](const std::string& s) { p.train_policy = ParseBalancePolicy(s); });
    ReadEnum(c, "policies", "train_weight", [&](const std::string& s) { p.train_weight = ParseBalanceWeight(s); });
    ReadEnum(c, "policies", "tool_mode", [&](const std::string& s) { p.tool_mode = ParseToolMode(s); });
    ReadEnum(c, "policies", "victim", [&](const std::string& s) { p.victim = ParseVictimPolicy(s); });
    Read(c, "policies", "inference_factor", p.inference_factor);
    Read(c, "policies", "minibatches", p.minibatches);
    Read(c, "policies", "drop_filtered_for_training", p.drop_filtered_for_training);
  }
  if (auto it = doc.find("sample"); it != doc.end()) {
    const json& c = *it;
    CheckKeys(c, "sample",
              {"batch_size", "samples_per_prompt", "task_type", "step_selector", "num_steps", "max_response_len",
               "with_replacement", "seed"});
    SampleSpec s = config.sample.value_or(SampleSpec{});
    Read(c, "sample", "batch_size", s.batch_size);
    Read(c, "sample", "samples_per_prompt", s.samples_per_prompt);
    if (auto t = c.find("task_type"); t != c.end()) {
      if (!t->is_string()) throw ConfigError("'sample.task_type' must be a string");
      s.task_type = TaskType::FromString(t->get<std::string>());
    }
    if (auto sel = c.find("step_selector"); sel != c.end()) s.step_selector = ParseSelector(*sel);
    Read(c, "sample", "num_steps", s.num_steps);
    ReadOptional(c, "sample", "max_response_len", s.max_response_len);
    Read(c, "sample", "with_replacement", s.with_replacement);
    Read(c, "sample", "seed", s.seed);
    config.sample = s;
  }
  if (auto it = doc.find("run"); it != doc.end()) {
    const json& c = *it;
    CheckKeys(c, "run", {"mode", "max_staleness", "steps", "max_response_len"});
    ReadEnum(c, "run", "mode", [&](const std::string& s) { SetMode(config, ParseRunMode(s)); });
    Read(c, "run", "max_staleness", config.max_staleness);
    Read(c, "run", "steps", config.steps);
    ReadOptional(c, "run", "max_response_len", config.max_response_len);
  }
}

void ApplyConfigFile(const std::filesystem::path& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    ApplyConfigJson(buf.str(), config);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string CanonicalConfigJson(const RunConfig& config) {
  json doc;
  doc["cluster"] = {{"rollout_ranks", config.cluster.rollout_ranks},
                    {"train_ranks", config.cluster.train_ranks},
                    {"colocated", config.cluster.colocated},
                    {"kv_capacity_tokens", OptionalJson(config.cluster.kv_capacity_tokens)}};
  const CostModel& m = config.cost;
  doc["cost"] = {{"t_prefill_per_token", m.t_prefill_per_token}, {"t_decode_per_token", m.t_decode_per_token},
                 {"t_train_per_token", m.t_train_per_token},     {"t_train_quadratic", m.t_train_quadratic},
                 {"t_comm_per_minibatch", m.t_comm_per_minibatch}, {"t_sched_per_request", m.t_sched_per_request},
                 {"t_weight_sync", m.t_weight_sync}};
  const SimPolicies& p = config.policies;
  doc["policies"] = {{"rollout_policy", ToString(p.rollout_policy)},
                     {"rollout_weight", ToString(p.rollout_weight)},
                     {"train_policy", ToString(p.train_policy)},
                     {"train_weight", ToString(p.train_weight)},
                     {"tool_mode", ToString(p.tool_mode)},
                     {"victim", ToString(p.victim)},
                     {"inference_factor", p.inference_factor},
                     {"minibatches", p.minibatches},
                     {"drop_filtered_for_training", p.drop_filtered_for_training}};
  if (config.sample) {
    const SampleSpec& s = *config.sample;
    doc["sample"] = {{"batch_size", s.batch_size},
                     {"samples_per_prompt", s.samples_per_prompt},
                     {"task_type", s.task_type.ToString()},
                     {"step_selector", SelectorJson(s.step_selector)},
                     {"num_steps", s.num_steps},
                     {"max_response_len", OptionalJson(s.max_response_len)},
                     {"with_replacement", s.with_replacement},
                     {"seed", s.seed}};
  } else {
    doc["sample"] = nullptr;
  }
  doc["run"] = {{"mode", ToString(config.mode)},
                {"max_staleness", config.max_staleness},
                {"steps", config.steps},
                {"max_response_len", OptionalJson(config.max_response_len)}};
  return doc.dump();
}

std::string ConfigDigest(const RunConfig& config) { return Fnv1aHex(CanonicalConfigJson(config)); }

}  // namespace rlvrsim
