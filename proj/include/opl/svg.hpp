#pragma once

#include <string>
#include <vector>

namespace opl {

struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries break the line
};

// Static line chart with axes, ticks and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<SvgSeries>& series);

}  // namespace opl
