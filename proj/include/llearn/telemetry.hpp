// Copyright 2026 The llearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "llearn/diffcore.hpp"
#include "llearn/errors.hpp"
#include "llearn/rollout.hpp"
#include "llearn/trainer.hpp"

namespace llearn {

// Telemetry CSV: one row per control step. Vector quantities expand to one
// column per channel, suffixed _0 .. _{n-1}:
//   t, q_i, qd_i, qref_i, e, u_i, s_i, dhat_i, V, Vdot, Vdot_pred, sat
// Numbers use the shortest round-trip decimal form; an undefined Vdot is "nan".

inline std::vector<std::string> telemetry_columns(std::size_t n) {
  std::vector<std::string> cols{"t"};
  auto channel = [&](const char* name) {
    for (std::size_t i = 0; i < n; ++i) cols.push_back(std::string(name) + "_" + std::to_string(i));
  };
  channel("q");
  channel("qd");
  channel("qref");
  cols.push_back("e");
  channel("u");
  channel("s");
  channel("dhat");
  for (const char* c : {"V", "Vdot", "Vdot_pred", "sat"}) cols.emplace_back(c);
  return cols;
}

namespace detail {

inline void csv_join(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i];
  os << '\n';
}

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, r.ptr};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_field(const std::string& s, const std::string& column) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw SchemaError(column, "malformed value '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_telemetry(std::ostream& os, const std::vector<TelemetryRecord>& records, std::size_t n) {
  detail::csv_join(os, telemetry_columns(n));
  std::vector<std::string> row;
  for (const auto& r : records) {
    row.clear();
    row.push_back(detail::format_double(r.t));
    auto vec = [&](const Eigen::VectorXd& v) {
      require(static_cast<std::size_t>(v.size()) == n, "telemetry: channel count mismatch");
      for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(detail::format_double(v[i]));
    };
    vec(r.q);
    vec(r.qd);
    vec(r.q_ref);
    row.push_back(detail::format_double(r.e));
    vec(r.u);
    vec(r.s);
    vec(r.dhat);
    for (double x : {r.V, r.Vdot, r.Vdot_pred}) row.push_back(detail::format_double(x));
    row.push_back(r.saturated ? "1" : "0");
    detail::csv_join(os, row);
  }
}

/// Parses a telemetry CSV; the channel count is inferred from the header.
inline std::vector<TelemetryRecord> parse_telemetry(std::istream& is, std::size_t* channels = nullptr) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("t", "missing header");
  const auto header = detail::split_csv_line(line);
  std::size_t n = 0;
  while (1 + n < header.size() && header[1 + n].rfind("q_", 0) == 0) ++n;
  if (n == 0) throw SchemaError(header.size() > 1 ? header[1] : "q_0", "expected position columns");
  const auto want = telemetry_columns(n);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (i >= header.size()) throw SchemaError(want[i], "column missing");
    if (header[i] != want[i]) throw SchemaError(want[i], "unexpected header '" + header[i] + "'");
  }
  if (header.size() != want.size()) throw SchemaError(header[want.size()], "unexpected extra column");
  if (channels) *channels = n;

  std::vector<TelemetryRecord> out;
  const auto N = static_cast<Eigen::Index>(n);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != want.size())
      throw SchemaError(want[std::min(f.size(), want.size() - 1)], "row has " + std::to_string(f.size()) + " fields");
    std::size_t c = 0;
    auto next = [&] {
      const double v = detail::parse_field(f[c], want[c]);
      ++c;
      return v;
    };
    auto vec = [&] {
      Eigen::VectorXd v(N);
      for (Eigen::Index i = 0; i < N; ++i) v[i] = next();
      return v;
    };
    TelemetryRecord r;
    r.t = next();
    r.q = vec();
    r.qd = vec();
    r.q_ref = vec();
    r.e = next();
    r.u = vec();
    r.s = vec();
    r.dhat = vec();
    r.V = next();
    r.Vdot = next();
    r.Vdot_pred = next();
    if (f[c] != "0" && f[c] != "1") throw SchemaError("sat", "expected 0 or 1, got '" + f[c] + "'");
    r.saturated = f[c] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

// Training history CSV, one row per outer iteration:
//   k, noise, collected, buffer_size, diverged_episodes, batches,
//   loss_head, loss_tail, E_k, itae, eval_diverged, wall_clock
// loss_head / loss_tail are the mean loss of the first and last 10% of batches.
inline void write_history(std::ostream& os, const std::vector<IterationRecord>& history) {
  detail::csv_join(os, {"k", "noise", "collected", "buffer_size", "diverged_episodes", "batches", "loss_head",
                        "loss_tail", "E_k", "itae", "eval_diverged", "wall_clock"});
  for (const auto& h : history) {
    const std::size_t tenth = std::max<std::size_t>(1, h.losses.size() / 10);
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < tenth && i < h.losses.size(); ++i) {
      head += h.losses[i];
      tail += h.losses[h.losses.size() - 1 - i];
    }
    const double denom = static_cast<double>(std::min(tenth, h.losses.size()));
    detail::csv_join(os, {std::to_string(h.k), detail::format_double(h.noise), std::to_string(h.collected),
                          std::to_string(h.buffer_size), std::to_string(h.diverged_episodes),
                          std::to_string(h.losses.size()), detail::format_double(denom > 0 ? head / denom : 0.0),
                          detail::format_double(denom > 0 ? tail / denom : 0.0), detail::format_double(h.E_k),
                          detail::format_double(h.itae), h.eval_diverged ? "1" : "0",
                          detail::format_double(h.wall_clock)});
  }
}

// Per-batch loss curve: k, batch, loss.
inline void write_losses(std::ostream& os, const std::vector<IterationRecord>& history) {
  detail::csv_join(os, {"k", "batch", "loss"});
  for (const auto& h : history)
    for (std::size_t b = 0; b < h.losses.size(); ++b)
      detail::csv_join(os, {std::to_string(h.k), std::to_string(b), detail::format_double(h.losses[b])});
}

// Optimiser trace: generation, best.
inline void write_trace(std::ostream& os, const std::vector<double>& trace) {
  detail::csv_join(os, {"generation", "best"});
  for (std::size_t g = 0; g < trace.size(); ++g)
    detail::csv_join(os, {std::to_string(g), detail::format_double(trace[g])});
}

}  // namespace llearn
