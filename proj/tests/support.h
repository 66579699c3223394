// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random generators and reference oracles shared by the unit and acceptance
// tests. Oracles are written from the definitions and do not call into the
// library's statistics or scheduling code.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "rlvrsim/trace.h"

namespace rlvrsim::testing {

class Gen {
 public:
  explicit Gen(uint64_t seed) : eng_(seed) {}

  int64_t Int(int64_t lo, int64_t hi) {  // inclusive
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(eng_());
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % span;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return lo + static_cast<int64_t>(x % span);
  }
  double Unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  bool Coin(double p = 0.5) { return Unit() < p; }
  // Log-uniform integer in [lo, hi], lo >= 1.
  int64_t LogUniform(int64_t lo, int64_t hi) {
    const double a = std::log(static_cast<double>(lo));
    const double b = std::log(static_cast<double>(hi) + 1.0);
    return std::clamp<int64_t>(static_cast<int64_t>(std::exp(a + (b - a) * Unit())), lo, hi);
  }
  template <typename T>
  const T& Pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(Int(0, static_cast<int64_t>(v.size()) - 1))];
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

inline std::string RandomText(Gen& g) {
  static const std::vector<std::string> atoms = {
      "a", "Z", "0", "_", "-", " ", ",", "\"", "'", ";", "\t", "[", "]", "{", "}", ":", "\\", "\xc3\xa9", "\xe4\xb8\xad", "q"};
  std::string s;
  const int64_t n = g.Int(1, 12);
  for (int64_t i = 0; i < n; ++i) s += g.Pick(atoms);
  return s;
}

inline double RandomLatency(Gen& g) {
  switch (g.Int(0, 3)) {
    case 0: return 0.0;
    case 1: return static_cast<double>(g.Int(0, 100000));
    case 2: return g.Unit() * std::pow(10.0, static_cast<double>(g.Int(-3, 6)));
    default: return std::nextafter(g.Unit() * 1000.0, 0.0);
  }
}

// Valid random trace. Optional columns are switched on per trace so that
// schema minimality is exercised as well.
inline Trace RandomTrace(Gen& g, int64_t n) {
  static const std::vector<TaskType> known = {TaskType::Kind::kMathematics, TaskType::Kind::kProgramming,
                                              TaskType::Kind::kSearching, TaskType::Kind::kVideoUnderstanding,
                                              TaskType::Kind::kImageUnderstanding, TaskType::Kind::kToolUse};
  const bool with_prompt = g.Coin();
  const bool with_sample = with_prompt && g.Coin();
  const bool with_turns = g.Coin();
  const bool with_latency = g.Coin();
  const bool with_filtered = g.Coin();
  const bool with_other = g.Coin(0.3);
  Trace t;
  t.records.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    TraceRecord r;
    r.step = g.Int(0, 200);
    r.input_len = g.Int(0, 40000);
    r.output_len = g.Coin(0.05) ? 0 : g.LogUniform(1, 32000);
    if (with_other && g.Coin(0.2)) {
      std::string name = "custom" + RandomText(g);
      r.task_type = TaskType::FromString(name);
    } else {
      r.task_type = g.Pick(known);
    }
    if (with_prompt && g.Coin(0.9)) {
      r.prompt_id = RandomText(g);
      if (with_sample && g.Coin(0.9)) r.sample_id = g.Int(0, 63);
    }
    if (with_turns && g.Coin(0.9)) r.turn_count = g.Int(1, 12);
    if (with_latency && g.Coin(0.9)) {
      std::vector<double> lat;
      const int64_t k = g.Int(0, 5);
      for (int64_t j = 0; j < k; ++j) lat.push_back(RandomLatency(g));
      r.tool_latencies_ms = std::move(lat);
    }
    if (with_filtered) r.filtered = g.Coin(0.2);
    t.records.push_back(std::move(r));
  }
  return t;
}

inline TraceRecord Req(int64_t input, int64_t output, std::optional<std::string> prompt = std::nullopt) {
  TraceRecord r;
  r.input_len = input;
  r.output_len = output;
  r.task_type = TaskType::Kind::kMathematics;
  r.prompt_id = std::move(prompt);
  return r;
}

namespace oracle {

// Linear-interpolation percentile at rank q * (n - 1), using selection
// rather than a full sort and long double arithmetic.
inline double Percentile(std::vector<double> v, double q) {
  const long double pos = static_cast<long double>(q) * static_cast<long double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const long double a = v[lo];
  if (lo + 1 >= v.size() || pos == static_cast<long double>(lo)) return static_cast<double>(a);
  const long double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return static_cast<double>(a + (pos - static_cast<long double>(lo)) * (b - a));
}

// (distinct value, fraction of values <= it) by direct counting.
inline std::vector<std::pair<double, double>> Cdf(const std::vector<double>& v) {
  std::vector<double> distinct;
  for (double x : v) {
    if (std::find(distinct.begin(), distinct.end(), x) == distinct.end()) distinct.push_back(x);
  }
  std::sort(distinct.begin(), distinct.end());
  std::vector<std::pair<double, double>> out;
  for (double d : distinct) {
    size_t c = 0;
    for (double x : v) c += x <= d ? 1 : 0;
    out.emplace_back(d, static_cast<double>(c) / static_cast<double>(v.size()));
  }
  return out;
}

// Textbook Pearson formula with exact integer sums.
inline std::optional<double> PearsonInt(const std::vector<int64_t>& x, const std::vector<int64_t>& y) {
  const __int128 n = static_cast<__int128>(x.size());
  if (n < 2) return std::nullopt;
  __int128 sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<__int128>(x[i]) * x[i];
    syy += static_cast<__int128>(y[i]) * y[i];
    sxy += static_cast<__int128>(x[i]) * y[i];
  }
  const __int128 cov = n * sxy - sx * sy;
  const __int128 vx = n * sxx - sx * sx;
  const __int128 vy = n * syy - sy * sy;
  if (vx == 0 || vy == 0) return std::nullopt;
  return static_cast<double>(static_cast<long double>(cov) /
                             std::sqrt(static_cast<long double>(vx) * static_cast<long double>(vy)));
}

// Base-2 Jensen-Shannon divergence from the definition over normalized counts.
inline double Jsd(const std::vector<double>& p_counts, const std::vector<double>& q_counts) {
  long double sp = 0, sq = 0;
  for (double c : p_counts) sp += c;
  for (double c : q_counts) sq += c;
  auto kl = [](long double a, long double m) { return a > 0 ? a * std::log2(a / m) : 0.0L; };
  long double d = 0;
  for (size_t i = 0; i < p_counts.size(); ++i) {
    const long double p = p_counts[i] / sp;
    const long double q = q_counts[i] / sq;
    const long double m = (p + q) / 2;
    d += 0.5L * kl(p, m) + 0.5L * kl(q, m);
  }
  return static_cast<double>(d);
}

// Equal-width histogram over [lo, hi] for integer-valued data, with exact
// integer bin tests: x is in bin k when k * w <= (x - lo) * bins < (k + 1) * w.
inline std::vector<double> HistogramInt(const std::vector<int64_t>& xs, int64_t lo, int64_t hi, int bins) {
  std::vector<double> h(static_cast<size_t>(bins), 0.0);
  const int64_t w = hi - lo;
  for (int64_t x : xs) {
    if (w == 0) {
      h[0] += 1;
      continue;
    }
    for (int k = 0; k < bins; ++k) {
      const __int128 scaled = static_cast<__int128>(x - lo) * bins;
      const bool last = k == bins - 1;
      if (scaled >= static_cast<__int128>(k) * w && (last || scaled < static_cast<__int128>(k + 1) * w)) {
        h[static_cast<size_t>(k)] += 1;
        break;
      }
    }
  }
  return h;
}

// Optimal makespan by exhaustive assignment of every item to every bin.
inline int64_t OptimalMakespan(const std::vector<int64_t>& w, int k) {
  std::vector<int64_t> loads(static_cast<size_t>(k), 0);
  int64_t best = std::numeric_limits<int64_t>::max();
  // Depth-first with symmetry breaking: item i may open at most one new bin.
  auto rec = [&](auto&& self, size_t i, int used) -> void {
    const int64_t cur = *std::max_element(loads.begin(), loads.end());
    if (cur >= best) return;
    if (i == w.size()) {
      best = cur;
      return;
    }
    for (int b = 0; b < std::min(k, used + 1); ++b) {
      loads[static_cast<size_t>(b)] += w[i];
      self(self, i + 1, std::max(used, b + 1));
      loads[static_cast<size_t>(b)] -= w[i];
    }
  };
  rec(rec, 0, 0);
  return best == std::numeric_limits<int64_t>::max() ? 0 : best;
}

// Greedy LPT written independently: stable descending order, lowest-index
// least-loaded bin.
inline int64_t LptMakespan(std::vector<int64_t> w, int k) {
  std::stable_sort(w.begin(), w.end(), std::greater<>());
  std::vector<int64_t> loads(static_cast<size_t>(k), 0);
  for (int64_t x : w) {
    size_t best = 0;
    for (size_t b = 1; b < loads.size(); ++b) {
      if (loads[b] < loads[best]) best = b;
    }
    loads[best] += x;
  }
  return *std::max_element(loads.begin(), loads.end());
}

}  // namespace oracle

inline bool RelClose(double a, double b, double rel) {
  if (a == b) return true;
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) <= rel * scale;
}

struct CliResult {
  int exit_code = -1;
  std::string output;
};

// Runs the command-line tool with `args` (already shell-quoted), capturing
// stdout and stderr together.
inline CliResult RunCli(const std::string& args) {
  CliResult r;
  const std::string cmd = std::string("\"") + RLVRSIM_CLI_PATH + "\" " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace rlvrsim::testing
