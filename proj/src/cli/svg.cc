// Copyright 2026 The Trajplan Authors
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

#include "trajplan/cli/svg.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "trajplan/envs/envs.h"

namespace trajplan {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 160;
constexpr double kTop = 40;
constexpr double kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string Escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + Num(w) +
         "\" height=\"" + Num(h) + "\" viewBox=\"0 0 " + Num(w) + " " + Num(h) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string Text(double x, double y, const std::string& s,
                 const char* anchor = "middle", double rotate = 0) {
  std::string out = "<text x=\"" + Num(x) + "\" y=\"" + Num(y) +
                    "\" text-anchor=\"" + anchor + "\"";
  if (rotate != 0) {
    out += " transform=\"rotate(" + Num(rotate) + " " + Num(x) + " " + Num(y) + ")\"";
  }
  return out + ">" + Escape(s) + "</text>\n";
}

// Up to ~6 round tick positions covering [lo, hi].
std::vector<double> NiceTicks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5;
  const double mag = std::pow(10, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

}  // namespace

std::string SvgLinePlot(const std::vector<Series>& series,
                        const LinePlotOptions& options) {
  auto transform = [&](double y) { return options.log_y ? std::log10(y) : y; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series) {
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (options.log_y && s.y[i] <= 0) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, transform(s.y[i]));
      y1 = std::max(y1, transform(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::string svg = Header(kWidth, kHeight);
  svg += Text(kWidth / 2, 22, options.title);
  svg += "<rect x=\"" + Num(kLeft) + "\" y=\"" + Num(kTop) + "\" width=\"" +
         Num(pw) + "\" height=\"" + Num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : NiceTicks(x0, x1)) {
    svg += "<line x1=\"" + Num(px(t)) + "\" y1=\"" + Num(kTop + ph) + "\" x2=\"" +
           Num(px(t)) + "\" y2=\"" + Num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    svg += Text(px(t), kTop + ph + 18, Tick(t));
  }
  for (double t : NiceTicks(y0, y1)) {
    svg += "<line x1=\"" + Num(kLeft - 5) + "\" y1=\"" + Num(py(t)) + "\" x2=\"" +
           Num(kLeft) + "\" y2=\"" + Num(py(t)) + "\" stroke=\"black\"/>\n";
    svg += Text(kLeft - 8, py(t) + 4, options.log_y ? "1e" + Tick(t) : Tick(t), "end");
  }
  svg += Text(kLeft + pw / 2, kHeight - 12, options.x_label);
  svg += Text(18, kTop + ph / 2, options.y_label, "middle", -90);

  for (size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    std::string path;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (options.log_y && s.y[i] <= 0) continue;
      path += (path.empty() ? "M" : " L") + Num(px(s.x[i])) + " " +
              Num(py(transform(s.y[i])));
    }
    if (!path.empty()) {
      svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kTop + 12 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + Num(kWidth - kRight + 12) + "\" y1=\"" + Num(ly) +
           "\" x2=\"" + Num(kWidth - kRight + 32) + "\" y2=\"" + Num(ly) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += Text(kWidth - kRight + 38, ly + 4, s.label, "start");
  }
  return svg + "</svg>\n";
}

std::string SvgHeatmap(const Eigen::MatrixXd& values,
                       const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels,
                       const std::string& title, const std::string& x_label,
                       const std::string& y_label, bool annotate) {
  const double cell = 44;
  const double left = 80, top = 40, bottom = 60;
  const double w = left + cell * values.cols() + 20;
  const double h = top + cell * values.rows() + bottom;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int r = 0; r < values.rows(); ++r) {
    for (int c = 0; c < values.cols(); ++c) {
      if (!std::isfinite(values(r, c))) continue;
      lo = std::min(lo, values(r, c));
      hi = std::max(hi, values(r, c));
    }
  }
  // Log color scale when the values span decades.
  const bool log_scale = lo > 0 && hi / lo > 100;
  auto level = [&](double v) {
    if (!std::isfinite(v) || hi <= lo) return 0.0;
    if (log_scale) return std::log(v / lo) / std::log(hi / lo);
    return (v - lo) / (hi - lo);
  };

  std::string svg = Header(w, h);
  svg += Text(w / 2, 22, title);
  for (int r = 0; r < values.rows(); ++r) {
    const double y = top + cell * (values.rows() - 1 - r);
    for (int c = 0; c < values.cols(); ++c) {
      const double x = left + cell * c;
      const double t = level(values(r, c));
      const int red = static_cast<int>(std::lround(255 - 200 * t));
      const int green = static_cast<int>(std::lround(255 - 150 * t));
      const int blue = static_cast<int>(std::lround(255 - 40 * t));
      char fill[16];
      std::snprintf(fill, sizeof(fill), "#%02x%02x%02x", red, green, blue);
      svg += "<rect x=\"" + Num(x) + "\" y=\"" + Num(y) + "\" width=\"" +
             Num(cell) + "\" height=\"" + Num(cell) + "\" fill=\"" + fill +
             "\" stroke=\"white\"/>\n";
      if (annotate) {
        svg += "<text x=\"" + Num(x + cell / 2) + "\" y=\"" + Num(y + cell / 2 + 4) +
               "\" text-anchor=\"middle\" font-size=\"10\" fill=\"" +
               (t > 0.6 ? "white" : "black") + "\">" + Tick(values(r, c)) +
               "</text>\n";
      }
    }
    if (r < static_cast<int>(row_labels.size())) {
      svg += Text(left - 6, y + cell / 2 + 4, row_labels[r], "end");
    }
  }
  for (int c = 0; c < values.cols() && c < static_cast<int>(col_labels.size()); ++c) {
    svg += Text(left + cell * c + cell / 2, top + cell * values.rows() + 16,
                col_labels[c]);
  }
  svg += Text(left + cell * values.cols() / 2, h - 14, x_label);
  svg += Text(16, top + cell * values.rows() / 2, y_label, "middle", -90);
  return svg + "</svg>\n";
}

std::string SvgFourRooms(const std::vector<Trace>& traces,
                         const std::string& title) {
  const double size = 440, margin = 30, top = 40;
  auto px = [&](double x) { return margin + x * size; };
  auto py = [&](double y) { return top + (1 - y) * size; };
  std::string svg = Header(size + 2 * margin, size + top + margin);
  svg += Text(margin + size / 2, 24, title);
  svg += "<rect x=\"" + Num(px(0)) + "\" y=\"" + Num(py(1)) + "\" width=\"" +
         Num(size) + "\" height=\"" + Num(size) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const FourRooms::Rect& r : FourRooms::WallRects()) {
    svg += "<rect x=\"" + Num(px(r.x0)) + "\" y=\"" + Num(py(r.y1)) +
           "\" width=\"" + Num((r.x1 - r.x0) * size) + "\" height=\"" +
           Num((r.y1 - r.y0) * size) + "\" fill=\"#444444\"/>\n";
  }
  for (size_t k = 0; k < traces.size(); ++k) {
    const Trace& t = traces[k];
    const char* color = t.success ? kPalette[k % std::size(kPalette)] : "#999999";
    std::string path;
    for (const auto& p : t.points) {
      path += (path.empty() ? "M" : " L") + Num(px(p[0])) + " " + Num(py(p[1]));
    }
    if (!path.empty()) {
      svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"1.5\"" + (t.success ? "" : " stroke-dasharray=\"4 3\"") +
             "/>\n";
      svg += "<circle cx=\"" + Num(px(t.points.front()[0])) + "\" cy=\"" +
             Num(py(t.points.front()[1])) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    svg += "<circle cx=\"" + Num(px(t.goal[0])) + "\" cy=\"" + Num(py(t.goal[1])) +
           "\" r=\"" + Num(FourRooms::kGoalRadius * size) +
           "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace trajplan
