#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cct/encoding.hpp"
#include "cct/metrics.hpp"

namespace cct {

// Standalone SVG charts with deterministic byte output: all numbers go
// through fmt_double and nothing depends on wall time or locale.

struct SvgSeries {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

namespace detail {

struct SvgCanvas {
    int width = 860;
    int height = 520;
    int left = 70, right = 30, top = 40, bottom = 55;
    int plot_w() const { return width - left - right; }
    int plot_h() const { return height - top - bottom; }
};

inline double map_x(double x, double xmin, double xmax, const SvgCanvas& c) {
    if (xmax == xmin) return c.left;
    return c.left + (x - xmin) / (xmax - xmin) * c.plot_w();
}

inline double map_y(double y, double ymin, double ymax, const SvgCanvas& c) {
    if (ymax == ymin) return c.top + c.plot_h();
    return c.top + c.plot_h() - (y - ymin) / (ymax - ymin) * c.plot_h();
}

inline void svg_header(std::ostringstream& out, const SvgCanvas& c, const std::string& comment) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    if (!comment.empty()) out << "<!-- " << comment << " -->\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\""
        << c.height << "\" viewBox=\"0 0 " << c.width << " " << c.height << "\">\n";
    out << "<rect width=\"" << c.width << "\" height=\"" << c.height << "\" fill=\"white\"/>\n";
    out << "<style>\n"
           "  .axis { stroke:#000; stroke-width:1; }\n"
           "  .grid { stroke:#ddd; stroke-width:1; }\n"
           "  .label { font-family:sans-serif; font-size:12px; fill:#000; }\n"
           "  .title { font-family:sans-serif; font-size:15px; font-weight:bold; fill:#000; }\n"
           "</style>\n";
}

inline void axes_and_grid(std::ostringstream& out, const SvgCanvas& c, double xmin, double xmax,
                          double ymin, double ymax, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel, int xticks = 8,
                          int yticks = 5) {
    out << "<text class=\"title\" x=\"" << c.width / 2
        << "\" y=\"22\" text-anchor=\"middle\">" << title << "</text>\n";
    for (int i = 0; i <= xticks; ++i) {
        const double tx = xmin + (xmax - xmin) * i / xticks;
        const double px = map_x(tx, xmin, xmax, c);
        out << "<line class=\"grid\" x1=\"" << fmt_double(px) << "\" y1=\"" << c.top
            << "\" x2=\"" << fmt_double(px) << "\" y2=\"" << c.top + c.plot_h() << "\"/>\n";
        out << "<text class=\"label\" x=\"" << fmt_double(px) << "\" y=\""
            << c.top + c.plot_h() + 18 << "\" text-anchor=\"middle\">"
            << fmt_double(std::round(tx * 1000.0) / 1000.0) << "</text>\n";
    }
    for (int i = 0; i <= yticks; ++i) {
        const double ty = ymin + (ymax - ymin) * i / yticks;
        const double py = map_y(ty, ymin, ymax, c);
        out << "<line class=\"grid\" x1=\"" << c.left << "\" y1=\"" << fmt_double(py)
            << "\" x2=\"" << c.left + c.plot_w() << "\" y2=\"" << fmt_double(py) << "\"/>\n";
        out << "<text class=\"label\" x=\"" << c.left - 8 << "\" y=\"" << fmt_double(py + 4)
            << "\" text-anchor=\"end\">" << fmt_double(std::round(ty * 1000.0) / 1000.0)
            << "</text>\n";
    }
    out << "<line class=\"axis\" x1=\"" << c.left << "\" y1=\"" << c.top + c.plot_h()
        << "\" x2=\"" << c.left + c.plot_w() << "\" y2=\"" << c.top + c.plot_h() << "\"/>\n";
    out << "<line class=\"axis\" x1=\"" << c.left << "\" y1=\"" << c.top << "\" x2=\"" << c.left
        << "\" y2=\"" << c.top + c.plot_h() << "\"/>\n";
    out << "<text class=\"label\" x=\"" << c.width / 2 << "\" y=\"" << c.height - 12
        << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    out << "<text class=\"label\" x=\"16\" y=\"" << c.height / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << c.height / 2 << ")\">"
        << ylabel << "</text>\n";
}

inline void polyline(std::ostringstream& out, const std::vector<std::pair<double, double>>& pts,
                     double xmin, double xmax, double ymin, double ymax, const SvgCanvas& c,
                     const std::string& color, const std::string& dash = "") {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (!dash.empty()) out << " stroke-dasharray=\"" << dash << "\"";
    out << " points=\"";
    for (const auto& [x, y] : pts) {
        out << fmt_double(map_x(x, xmin, xmax, c)) << ',' << fmt_double(map_y(y, ymin, ymax, c))
            << ' ';
    }
    out << "\"/>\n";
    for (const auto& [x, y] : pts) {
        out << "<circle cx=\"" << fmt_double(map_x(x, xmin, xmax, c)) << "\" cy=\""
            << fmt_double(map_y(y, ymin, ymax, c)) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
}

inline void legend(std::ostringstream& out, const SvgCanvas& c,
                   const std::vector<std::pair<std::string, std::string>>& items) {
    const int x0 = c.left + 12;
    int y = c.top + 14;
    for (const auto& [label, color] : items) {
        out << "<line x1=\"" << x0 << "\" y1=\"" << y << "\" x2=\"" << x0 + 22 << "\" y2=\"" << y
            << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
        out << "<text class=\"label\" x=\"" << x0 + 28 << "\" y=\"" << y + 4 << "\">" << label
            << "</text>\n";
        y += 18;
    }
}

}  // namespace detail

// Multi-series line chart (loss/accuracy vs epoch).
inline std::string svg_line_chart(const std::vector<SvgSeries>& series, const std::string& title,
                                  const std::string& xlabel, const std::string& ylabel,
                                  const std::string& comment = "") {
    detail::SvgCanvas c;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (ymax > ymin) {
        const double pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;
    } else {
        ymin -= 0.5;
        ymax += 0.5;
    }

    std::ostringstream out;
    detail::svg_header(out, c, comment);
    detail::axes_and_grid(out, c, xmin, xmax, ymin, ymax, title, xlabel, ylabel);
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto& s : series) {
        detail::polyline(out, s.points, xmin, xmax, ymin, ymax, c, s.color);
        items.push_back({s.label, s.color});
    }
    detail::legend(out, c, items);
    out << "</svg>\n";
    return out.str();
}

// ROC plot with the chance diagonal.
inline std::string svg_roc(const std::vector<std::pair<double, double>>& fpr_tpr,
                           const std::string& comment = "") {
    detail::SvgCanvas c;
    std::ostringstream out;
    detail::svg_header(out, c, comment);
    detail::axes_and_grid(out, c, 0, 1, 0, 1, "Receiver operating characteristic",
                          "false positive rate", "true positive rate", 5, 5);
    detail::polyline(out, {{0, 0}, {1, 1}}, 0, 1, 0, 1, c, "#999999", "6 4");
    detail::polyline(out, fpr_tpr, 0, 1, 0, 1, c, "#1f77b4");
    detail::legend(out, c, {{"ROC", "#1f77b4"}, {"chance", "#999999"}});
    out << "</svg>\n";
    return out.str();
}

// 2x2 confusion-matrix heatmap; rows are predictions, columns are the
// actual categories.
inline std::string svg_confusion(const ConfusionMatrix& cm, const std::string& comment = "") {
    detail::SvgCanvas c;
    c.width = 560;
    c.height = 520;
    std::ostringstream out;
    detail::svg_header(out, c, comment);
    out << "<text class=\"title\" x=\"" << c.width / 2
        << "\" y=\"22\" text-anchor=\"middle\">Confusion matrix</text>\n";

    const long long counts[2][2] = {{cm.tp, cm.fp}, {cm.fn, cm.tn}};
    const char* names[2][2] = {{"TP", "FP"}, {"FN", "TN"}};
    long long max_count = 1;
    for (auto& row : counts)
        for (long long v : row) max_count = std::max(max_count, v);

    const int cell = 170;
    const int x0 = 120, y0 = 90;
    for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 2; ++col) {
            const double shade = static_cast<double>(counts[r][col]) /
                                 static_cast<double>(max_count);
            const int blue = 255 - static_cast<int>(shade * 155.0);
            out << "<rect x=\"" << x0 + col * cell << "\" y=\"" << y0 + r * cell
                << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
                << 255 - static_cast<int>(shade * 200.0) << ',' << blue << ",255)\" "
                << "stroke=\"#444\"/>\n";
            out << "<text class=\"title\" x=\"" << x0 + col * cell + cell / 2 << "\" y=\""
                << y0 + r * cell + cell / 2 - 8 << "\" text-anchor=\"middle\">" << names[r][col]
                << "</text>\n";
            out << "<text class=\"label\" x=\"" << x0 + col * cell + cell / 2 << "\" y=\""
                << y0 + r * cell + cell / 2 + 14 << "\" text-anchor=\"middle\">"
                << counts[r][col] << "</text>\n";
        }
    }
    out << "<text class=\"label\" x=\"" << x0 + cell << "\" y=\"" << y0 - 34
        << "\" text-anchor=\"middle\">actual</text>\n";
    out << "<text class=\"label\" x=\"" << x0 + cell / 2 << "\" y=\"" << y0 - 14
        << "\" text-anchor=\"middle\">positive</text>\n";
    out << "<text class=\"label\" x=\"" << x0 + cell + cell / 2 << "\" y=\"" << y0 - 14
        << "\" text-anchor=\"middle\">negative</text>\n";
    out << "<text class=\"label\" x=\"" << x0 - 70 << "\" y=\"" << y0 + cell
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << x0 - 70 << ' ' << y0 + cell
        << ")\">predicted</text>\n";
    out << "<text class=\"label\" x=\"" << x0 - 40 << "\" y=\"" << y0 + cell / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << x0 - 40 << ' '
        << y0 + cell / 2 << ")\">positive</text>\n";
    out << "<text class=\"label\" x=\"" << x0 - 40 << "\" y=\"" << y0 + cell + cell / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << x0 - 40 << ' '
        << y0 + cell + cell / 2 << ")\">negative</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace cct
