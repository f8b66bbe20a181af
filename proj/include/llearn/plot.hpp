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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "llearn/errors.hpp"
#include "llearn/rollout.hpp"

namespace llearn {

struct Series {
  std::string label;
  std::vector<double> y;
  std::string color;
};

namespace detail {

inline std::string fixed(double v, int digits = 2) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Static line chart; NaN samples break the line.
inline std::string svg_line_plot(const std::string& title, const std::string& y_label, const std::vector<double>& x,
                                 const std::vector<Series>& series) {
  constexpr double W = 720, H = 360, L = 70, R = 150, T = 40, B = 50;
  require(!x.empty(), "plot: empty x axis");
  double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
  for (const auto& s : series) {
    require(s.y.size() == x.size(), "plot: series length differs from x axis");
    for (double v : s.y)
      if (std::isfinite(v)) {
        ylo = std::min(ylo, v);
        yhi = std::max(yhi, v);
      }
  }
  if (!std::isfinite(ylo)) ylo = yhi = 0.0;
  if (yhi - ylo < 1e-12 * std::max(1.0, std::abs(yhi))) {
    ylo -= 1.0;
    yhi += 1.0;
  }
  const double xlo = x.front(), xhi = x.back() > x.front() ? x.back() : x.front() + 1.0;
  auto px = [&](double v) { return L + (v - xlo) / (xhi - xlo) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - ylo) / (yhi - ylo) * (H - T - B); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fixed(W, 0) + "\" height=\"" +
                    detail::fixed(H, 0) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fixed(W / 2 - R / 2, 0) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
         detail::escape_xml(title) + "</text>\n";
  svg += "<rect x=\"" + detail::fixed(L, 0) + "\" y=\"" + detail::fixed(T, 0) + "\" width=\"" +
         detail::fixed(W - L - R, 0) + "\" height=\"" + detail::fixed(H - T - B, 0) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = ylo + (yhi - ylo) * i / 4.0, xv = xlo + (xhi - xlo) * i / 4.0;
    svg += "<line x1=\"" + detail::fixed(L) + "\" x2=\"" + detail::fixed(W - R) + "\" y1=\"" + detail::fixed(py(yv)) +
           "\" y2=\"" + detail::fixed(py(yv)) + "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + detail::fixed(L - 6) + "\" y=\"" + detail::fixed(py(yv) + 4) + "\" text-anchor=\"end\">" +
           detail::tick_label(yv) + "</text>\n";
    svg += "<text x=\"" + detail::fixed(px(xv)) + "\" y=\"" + detail::fixed(H - B + 18) +
           "\" text-anchor=\"middle\">" + detail::tick_label(xv) + "</text>\n";
  }
  svg += "<text x=\"" + detail::fixed(W / 2 - R / 2, 0) + "\" y=\"" + detail::fixed(H - 10, 0) +
         "\" text-anchor=\"middle\">t [s]</text>\n";
  svg += "<text transform=\"translate(16," + detail::fixed(H / 2, 0) + ") rotate(-90)\" text-anchor=\"middle\">" +
         detail::escape_xml(y_label) + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        pen = false;
        continue;
      }
      d += (pen ? "L" : "M") + detail::fixed(px(x[i])) + " " + detail::fixed(py(s.y[i])) + " ";
      pen = true;
    }
    if (!d.empty()) d.pop_back();
    svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = T + 14 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + detail::fixed(W - R + 10) + "\" x2=\"" + detail::fixed(W - R + 30) + "\" y1=\"" +
           detail::fixed(ly - 4) + "\" y2=\"" + detail::fixed(ly - 4) + "\" stroke=\"" + s.color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::fixed(W - R + 36) + "\" y=\"" + detail::fixed(ly) + "\">" +
           detail::escape_xml(s.label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

/// Writes per-channel tracking, error norm and Lyapunov plots; returns the
/// files written.
inline std::vector<std::filesystem::path> plot_telemetry(const std::vector<TelemetryRecord>& rec, std::size_t n,
                                                         const std::filesystem::path& dir) {
  require(!rec.empty(), "plot: telemetry is empty");
  std::filesystem::create_directories(dir);
  std::vector<double> t;
  for (const auto& r : rec) t.push_back(r.t);
  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : rec) v.push_back(get(r));
    return v;
  };
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::string& file, const std::string& svg) {
    std::ofstream(dir / file, std::ios::binary) << svg;
    files.push_back(dir / file);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    emit("tracking_q" + std::to_string(i) + ".svg",
         svg_line_plot("Joint " + std::to_string(i) + " tracking", "angle [rad]", t,
                       {{"q", column([&](const TelemetryRecord& r) { return r.q[idx]; }), "#1f77b4"},
                        {"q_d", column([&](const TelemetryRecord& r) { return r.q_ref[idx]; }), "#d62728"}}));
  }
  emit("error.svg", svg_line_plot("Tracking error norm", "|q_d - q| [rad]", t,
                                  {{"e", column([](const TelemetryRecord& r) { return r.e; }), "#2ca02c"}}));
  emit("lyapunov.svg",
       svg_line_plot("Lyapunov function", "V, dV/dt", t,
                     {{"V", column([](const TelemetryRecord& r) { return r.V; }), "#9467bd"},
                      {"dV/dt measured", column([](const TelemetryRecord& r) { return r.Vdot; }), "#ff7f0e"},
                      {"dV/dt predicted", column([](const TelemetryRecord& r) { return r.Vdot_pred; }), "#8c564b"}}));
  return files;
}

}  // namespace llearn
