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

#ifndef TRAJPLAN_CLI_SVG_H_
#define TRAJPLAN_CLI_SVG_H_

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace trajplan {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LinePlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;  // non-positive values are dropped
};

// Line chart with axes, ticks and a legend. Output is a complete SVG document
// whose bytes depend only on the inputs.
std::string SvgLinePlot(const std::vector<Series>& series,
                        const LinePlotOptions& options);

// Heatmap of values(r, c) drawn with row 0 at the bottom. Cells are labeled
// with their value when `annotate` is set.
std::string SvgHeatmap(const Eigen::MatrixXd& values,
                       const std::vector<std::string>& row_labels,
                       const std::vector<std::string>& col_labels,
                       const std::string& title, const std::string& x_label,
                       const std::string& y_label, bool annotate);

struct Trace {
  std::vector<std::array<double, 2>> points;
  std::array<double, 2> goal;
  bool success = false;
};

// Four-rooms walls plus one polyline per trace, in unit-square coordinates.
std::string SvgFourRooms(const std::vector<Trace>& traces,
                         const std::string& title);

}  // namespace trajplan

#endif  // TRAJPLAN_CLI_SVG_H_
