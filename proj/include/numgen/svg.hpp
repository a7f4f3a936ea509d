#pragma once

#include <string>
#include <utility>
#include <vector>

namespace numgen {

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 480;
    int height = 480;
    bool diagonal = false;  // draw y = x
};

// Marks are circles with class "mark" and data-x / data-y attributes carrying the raw values.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const ChartOptions& options);

std::string bar_chart_svg(const std::vector<std::pair<std::string, double>>& bars, const ChartOptions& options);

void write_text_file(const std::string& path, const std::string& text);

} // namespace numgen
