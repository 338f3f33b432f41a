#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace knnmm {

struct SvgSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;  // both coordinates must be positive
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

}  // namespace detail

// Minimal log-log line plot: decade gridlines, one polyline per series, legend.
inline std::string svg_loglog(const std::vector<SvgSeries>& series, const std::string& title,
                              const std::string& xlabel, const std::string& ylabel,
                              int width = 640, int height = 480) {
    if (series.empty()) throw std::invalid_argument("svg_loglog: need at least one series");
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!(x > 0.0) || !(y > 0.0))
                throw std::invalid_argument("svg_loglog: coordinates must be positive");
            const double lx = std::log10(x), ly = std::log10(y);
            if (first) {
                xmin = xmax = lx;
                ymin = ymax = ly;
                first = false;
            } else {
                xmin = std::min(xmin, lx);
                xmax = std::max(xmax, lx);
                ymin = std::min(ymin, ly);
                ymax = std::max(ymax, ly);
            }
        }
    if (first) throw std::invalid_argument("svg_loglog: no points");
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;

    const double left = 70, right = width - 20, top = 40, bottom = height - 50;
    const auto px = [&](double lx) { return left + (lx - xmin) / (xmax - xmin) * (right - left); };
    const auto py = [&](double ly) { return bottom - (ly - ymin) / (ymax - ymin) * (bottom - top); };

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << detail::svg_escape(title) << "</text>\n";

    // decade gridlines with 1eK labels
    for (int e = static_cast<int>(std::ceil(xmin - 1e-9)); e <= static_cast<int>(std::floor(xmax + 1e-9)); ++e) {
        const double x = px(e);
        out << "<line x1=\"" << detail::svg_num(x) << "\" y1=\"" << detail::svg_num(top) << "\" x2=\""
            << detail::svg_num(x) << "\" y2=\"" << detail::svg_num(bottom)
            << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << detail::svg_num(x) << "\" y=\"" << detail::svg_num(bottom + 16)
            << "\" text-anchor=\"middle\" font-size=\"11\">1e" << e << "</text>\n";
    }
    for (int e = static_cast<int>(std::ceil(ymin - 1e-9)); e <= static_cast<int>(std::floor(ymax + 1e-9)); ++e) {
        const double y = py(e);
        out << "<line x1=\"" << detail::svg_num(left) << "\" y1=\"" << detail::svg_num(y) << "\" x2=\""
            << detail::svg_num(right) << "\" y2=\"" << detail::svg_num(y)
            << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << detail::svg_num(left - 6) << "\" y=\"" << detail::svg_num(y + 4)
            << "\" text-anchor=\"end\" font-size=\"11\">1e" << e << "</text>\n";
    }
    out << "<rect x=\"" << detail::svg_num(left) << "\" y=\"" << detail::svg_num(top) << "\" width=\""
        << detail::svg_num(right - left) << "\" height=\"" << detail::svg_num(bottom - top)
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">" << detail::svg_escape(xlabel) << "</text>\n";
    out << "<text x=\"18\" y=\"" << (top + bottom) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
        << (top + bottom) / 2 << ")\">" << detail::svg_escape(ylabel) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kColors[i % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[i].points)
            out << detail::svg_num(px(std::log10(x))) << ',' << detail::svg_num(py(std::log10(y))) << ' ';
        out << "\"/>\n";
        for (const auto& [x, y] : series[i].points)
            out << "<circle cx=\"" << detail::svg_num(px(std::log10(x))) << "\" cy=\""
                << detail::svg_num(py(std::log10(y))) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        const double ly = top + 16 + 16 * static_cast<double>(i);
        out << "<line x1=\"" << detail::svg_num(right - 120) << "\" y1=\"" << detail::svg_num(ly - 4)
            << "\" x2=\"" << detail::svg_num(right - 100) << "\" y2=\"" << detail::svg_num(ly - 4)
            << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << detail::svg_num(right - 94) << "\" y=\"" << detail::svg_num(ly)
            << "\" font-size=\"11\">" << detail::svg_escape(series[i].name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace knnmm
