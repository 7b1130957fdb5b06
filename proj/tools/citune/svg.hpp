#pragma once

#include <string>
#include <vector>

namespace citune::cli {

struct Series {
    std::string label;
    std::vector<double> values;
};

/// Grouped bars: one group per category, one bar per series inside a group.
std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series, const std::string& y_label);

/// Polylines sharing the x samples. Non-positive values are dropped on a log axis.
std::string line_plot(const std::string& title, const std::vector<double>& x, const std::vector<Series>& series,
                      const std::string& x_label, const std::string& y_label, bool log_y);

}  // namespace citune::cli
