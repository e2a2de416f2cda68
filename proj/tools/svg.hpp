#pragma once

// Minimal SVG charts for experiment summaries.

#include <string>
#include <vector>

namespace semimix::svg {

struct BoxGroup {
  std::string label;
  std::vector<double> values;
};

// One box per group (quartiles, whiskers at 1.5 IQR, outliers as dots).
std::string boxplot(const std::vector<BoxGroup>& groups, const std::string& title,
                    const std::string& y_label, bool log_scale = false);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_plot(const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label);

}  // namespace semimix::svg
