#include "numgen/svg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "numgen/error.hpp"

namespace numgen {

namespace {

constexpr double kMargin = 48.0;

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

void header(std::ostringstream& os, const ChartOptions& o) {
    os << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
                      o.width, o.height, o.width, o.height);
    os << fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", o.width, o.height);
    if (!o.title.empty())
        os << fmt::format("<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", o.width / 2,
                          escape(o.title));
    if (!o.x_label.empty())
        os << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n", o.width / 2,
                          o.height - 8, escape(o.x_label));
    if (!o.y_label.empty())
        os << fmt::format("<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" "
                          "transform=\"rotate(-90 14 {})\">{}</text>\n",
                          o.height / 2, o.height / 2, escape(o.y_label));
}

} // namespace

std::string scatter_svg(const std::vector<ScatterPoint>& points, const ChartOptions& options) {
    double lo = 0.0;
    double hi = 1.0;
    for (const auto& p : points) hi = std::max({hi, p.x, p.y});
    for (const auto& p : points) lo = std::min({lo, p.x, p.y});
    const double plot_w = options.width - 2 * kMargin;
    const double plot_h = options.height - 2 * kMargin;
    auto sx = [&](double v) { return kMargin + (v - lo) / (hi - lo) * plot_w; };
    auto sy = [&](double v) { return options.height - kMargin - (v - lo) / (hi - lo) * plot_h; };

    std::ostringstream os;
    header(os, options);
    os << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", kMargin,
                      kMargin, plot_w, plot_h);
    if (options.diagonal)
        os << fmt::format("<line class=\"diagonal\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" "
                          "stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n",
                          sx(lo), sy(lo), sx(hi), sy(hi));
    os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{:g}</text>\n", kMargin, options.height - kMargin + 14, lo);
    os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:g}</text>\n",
                      options.width - kMargin, options.height - kMargin + 14, hi);
    os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:g}</text>\n", kMargin - 4,
                      kMargin + 4, hi);
    for (const auto& p : points)
        os << fmt::format("<circle class=\"mark\" data-x=\"{:g}\" data-y=\"{:g}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" "
                          "fill=\"steelblue\" fill-opacity=\"0.5\"/>\n",
                          p.x, p.y, sx(p.x), sy(p.y));
    os << "</svg>\n";
    return os.str();
}

std::string bar_chart_svg(const std::vector<std::pair<std::string, double>>& bars, const ChartOptions& options) {
    double hi = 0.0;
    for (const auto& b : bars) hi = std::max(hi, b.second);
    if (hi <= 0.0) hi = 1.0;
    const double plot_w = options.width - 2 * kMargin;
    const double plot_h = options.height - 2 * kMargin;
    const double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());

    std::ostringstream os;
    header(os, options);
    os << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", kMargin,
                      options.height - kMargin, options.width - kMargin, options.height - kMargin);
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double h = bars[i].second / hi * plot_h;
        const double x = kMargin + i * slot + slot * 0.1;
        os << fmt::format("<rect class=\"bar\" data-value=\"{:g}\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" "
                          "height=\"{:.2f}\" fill=\"steelblue\"/>\n",
                          bars[i].second, x, options.height - kMargin - h, slot * 0.8, h);
        os << fmt::format("<text x=\"{:.2f}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                          x + slot * 0.4, options.height - kMargin + 14, escape(bars[i].first));
    }
    os << "</svg>\n";
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << text;
    if (!out) throw Error("write failed: " + path);
}

} // namespace numgen
