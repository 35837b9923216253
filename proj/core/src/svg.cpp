// Copyright 2026 The radt-lab Authors.
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


#include "radt/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace radt {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

// Chart body as a <g> translated by `dy`.
std::string chart_group(const Chart& c, double dy) {
  const double left = 60, right = 150, top = 30, bottom = 45;
  const double pw = c.width - left - right, ph = c.height - top - bottom;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : c.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - e);
      y1 = std::max(y1, s.y[i] + e);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x0 == x1) x0 -= 0.5, x1 += 0.5;
  if (y0 == y1) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string g = "<g transform=\"translate(0," + num(dy) + ")\">\n";
  g += "<text x=\"" + num(c.width / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(c.title) + "</text>\n";
  g += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) +
       "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    g += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(top + ph + 15) +
         "\" text-anchor=\"middle\" font-size=\"10\">" + label(fx) + "</text>\n";
    g += "<text x=\"" + num(left - 5) + "\" y=\"" + num(py(fy) + 3) +
         "\" text-anchor=\"end\" font-size=\"10\">" + label(fy) + "</text>\n";
  }
  g += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(c.height - 8) +
       "\" text-anchor=\"middle\" font-size=\"12\">" + escape(c.x_label) + "</text>\n";
  g += "<text x=\"14\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" font-size=\"12\" "
       "transform=\"rotate(-90 14 " + num(top + ph / 2) + ")\">" + escape(c.y_label) +
       "</text>\n";
  for (std::size_t si = 0; si < c.series.size(); ++si) {
    const Series& s = c.series[si];
    const std::string color = kPalette[si % std::size(kPalette)];
    if (!s.err.empty() && !s.x.empty()) {
      std::string band;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        band += num(px(s.x[i])) + "," + num(py(s.y[i] + s.err[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;)
        band += num(px(s.x[i])) + "," + num(py(s.y[i] - s.err[i])) + " ";
      band.pop_back();
      g += "<polygon points=\"" + band + "\" fill=\"" + color +
           "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i)
      pts += (i ? " " : "") + num(px(s.x[i])) + "," + num(py(s.y[i]));
    g += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"1.5\"/>\n";
    const double ly = top + 12 + 16 * static_cast<double>(si);
    g += "<line x1=\"" + num(left + pw + 10) + "\" y1=\"" + num(ly) + "\" x2=\"" +
         num(left + pw + 30) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    g += "<text x=\"" + num(left + pw + 35) + "\" y=\"" + num(ly + 4) + "\" font-size=\"11\">" +
         escape(s.name) + "</text>\n";
  }
  g += "</g>\n";
  return g;
}

}  // namespace

std::string svg_line_chart(const Chart& chart) { return svg_stack({chart}); }

std::string svg_stack(const std::vector<Chart>& charts) {
  double w = 0.0, h = 0.0;
  for (const auto& c : charts) {
    w = std::max(w, c.width);
    h += c.height;
  }
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" +
         num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  double dy = 0.0;
  for (const auto& c : charts) {
    out += chart_group(c, dy);
    dy += c.height;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace radt
