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


// Standalone SVG line charts with optional error bands.

#ifndef RADT_SVG_HPP_
#define RADT_SVG_HPP_

#include <string>
#include <vector>

namespace radt {

struct Series {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> err;  // optional, same length as y
};

struct Chart {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  double width = 640.0, height = 400.0;
};

std::string svg_line_chart(const Chart& chart);
// Several charts stacked vertically in one document.
std::string svg_stack(const std::vector<Chart>& charts);

}  // namespace radt

#endif  // RADT_SVG_HPP_
