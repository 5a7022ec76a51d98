// Copyright 2026 The mmplan Authors
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
#include <cstdio>
#include <string>

#include "mmplan/schedule_sim.hpp"

namespace mmplan {

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

struct GanttStyle {
  double plot_width = 960.0;
  double row_height = 22.0;
  double label_width = 140.0;
  double margin = 20.0;
  const char* forward_fill = "#4e79a7";
  const char* backward_fill = "#f28e2b";
};

// One row per device, rows in trace order (encoder modules above the LLM),
// a thin rule between modules and a time axis underneath.
inline std::string render_gantt(const ScheduleTrace& trace, const GanttStyle& style = {}) {
  using detail::fmt;
  const std::size_t rows = trace.devices.size();
  const double span = trace.iteration_time_ms > 0.0 ? trace.iteration_time_ms : 1.0;
  const double scale = style.plot_width / span;
  const double x0 = style.margin + style.label_width;
  const double y0 = style.margin;
  const double plot_h = static_cast<double>(rows) * style.row_height;
  const double width = x0 + style.plot_width + style.margin;
  const double height = y0 + plot_h + 40.0 + style.margin;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) + "\" height=\"" +
       fmt("%.0f", height) + "\" font-family=\"monospace\" font-size=\"11\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fmt("%.0f", width) + "\" height=\"" + fmt("%.0f", height) +
       "\" fill=\"white\"/>\n";

  for (std::size_t r = 0; r < rows; ++r) {
    const double y = y0 + static_cast<double>(r) * style.row_height;
    if (r > 0 && trace.device_module[r] != trace.device_module[r - 1]) {
      s += "<line class=\"module-rule\" x1=\"" + fmt("%.2f", style.margin) + "\" y1=\"" + fmt("%.2f", y) + "\" x2=\"" +
           fmt("%.2f", x0 + style.plot_width) + "\" y2=\"" + fmt("%.2f", y) + "\" stroke=\"#888\"/>\n";
    }
    s += "<text x=\"" + fmt("%.2f", style.margin) + "\" y=\"" + fmt("%.2f", y + style.row_height * 0.7) + "\">" +
         detail::xml_escape(trace.device_names[r]) + "</text>\n";
    for (const auto& e : trace.devices[r]) {
      const bool fwd = e.kind == TaskKind::forward;
      const double x = x0 + e.start_ms * scale;
      const double w = (e.end_ms - e.start_ms) * scale;
      s += "<rect class=\"task " + std::string(fwd ? "forward" : "backward") + "\" x=\"" + fmt("%.2f", x) +
           "\" y=\"" + fmt("%.2f", y + 2.0) + "\" width=\"" + fmt("%.2f", w) + "\" height=\"" +
           fmt("%.2f", style.row_height - 4.0) + "\" fill=\"" + (fwd ? style.forward_fill : style.backward_fill) +
           "\" stroke=\"#222\" stroke-width=\"0.5\"/>\n";
      s += "<text class=\"mb\" x=\"" + fmt("%.2f", x + w / 2.0) + "\" y=\"" + fmt("%.2f", y + style.row_height * 0.7) +
           "\" text-anchor=\"middle\" fill=\"white\">" + std::to_string(e.microbatch) + "</text>\n";
    }
  }

  // axes
  const double ya = y0 + plot_h;
  s += "<line class=\"axis\" x1=\"" + fmt("%.2f", x0) + "\" y1=\"" + fmt("%.2f", y0) + "\" x2=\"" + fmt("%.2f", x0) +
       "\" y2=\"" + fmt("%.2f", ya) + "\" stroke=\"black\"/>\n";
  s += "<line class=\"axis\" x1=\"" + fmt("%.2f", x0) + "\" y1=\"" + fmt("%.2f", ya) + "\" x2=\"" +
       fmt("%.2f", x0 + style.plot_width) + "\" y2=\"" + fmt("%.2f", ya) + "\" stroke=\"black\"/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double t = span * i / kTicks;
    const double x = x0 + t * scale;
    s += "<line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.2f", ya) + "\" x2=\"" + fmt("%.2f", x) + "\" y2=\"" +
         fmt("%.2f", ya + 5.0) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", ya + 18.0) + "\" text-anchor=\"middle\">" +
         fmt("%.6g", t) + "</text>\n";
  }
  s += "<text x=\"" + fmt("%.2f", x0 + style.plot_width / 2.0) + "\" y=\"" + fmt("%.2f", ya + 34.0) +
       "\" text-anchor=\"middle\">time (ms)</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace mmplan
