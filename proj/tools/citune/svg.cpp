#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace citune::cli {

namespace {

constexpr double kWidth = 760, kHeight = 440;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

const char* colour(std::size_t k) { return kPalette[k % (sizeof kPalette / sizeof kPalette[0])]; }

void header(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << px(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
       << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<Series>& series) {
    const double x = kWidth - kRight + 15;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double y = kTop + 10 + 18.0 * static_cast<double>(k);
        os << "<rect x=\"" << px(x) << "\" y=\"" << px(y - 9) << "\" width=\"12\" height=\"12\" fill=\"" << colour(k)
           << "\"/><text x=\"" << px(x + 18) << "\" y=\"" << px(y + 2) << "\">" << escape(series[k].label)
           << "</text>\n";
    }
}

void axes(std::ostringstream& os, const std::string& x_label, const std::string& y_label) {
    const double x0 = kLeft, y0 = kHeight - kBottom, x1 = kWidth - kRight;
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(x0) << "\" y2=\"" << px(y0)
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << px(x0) << "\" y1=\"" << px(y0) << "\" x2=\"" << px(x1) << "\" y2=\"" << px(y0)
       << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << px((x0 + x1) / 2) << "\" y=\"" << px(kHeight - 12) << "\" text-anchor=\"middle\">"
       << escape(x_label) << "</text>\n"
       << "<text transform=\"translate(18," << px((kTop + y0) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(y_label) << "</text>\n";
}

}  // namespace

std::string bar_chart(const std::string& title, const std::vector<std::string>& categories,
                      const std::vector<Series>& series, const std::string& y_label) {
    std::ostringstream os;
    header(os, title);
    double top = 0.0;
    for (const auto& s : series)
        for (double v : s.values)
            if (std::isfinite(v)) top = std::max(top, v);
    if (!(top > 0.0)) top = 1.0;
    top *= 1.1;

    const double x0 = kLeft, y0 = kHeight - kBottom, plot_w = kWidth - kRight - kLeft, plot_h = y0 - kTop;
    for (int k = 0; k <= 5; ++k) {
        const double v = top * k / 5.0, y = y0 - plot_h * k / 5.0;
        os << "<line x1=\"" << px(x0 - 4) << "\" y1=\"" << px(y) << "\" x2=\"" << px(x0 + plot_w) << "\" y2=\""
           << px(y) << "\" stroke=\"#ddd\"/><text x=\"" << px(x0 - 6) << "\" y=\"" << px(y + 4)
           << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
    }
    const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(categories.size(), 1));
    const double bar_w = 0.8 * group_w / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double gx = x0 + group_w * static_cast<double>(c) + 0.1 * group_w;
        for (std::size_t k = 0; k < series.size(); ++k) {
            if (c >= series[k].values.size() || !std::isfinite(series[k].values[c])) continue;
            const double h = plot_h * series[k].values[c] / top;
            os << "<rect x=\"" << px(gx + bar_w * static_cast<double>(k)) << "\" y=\"" << px(y0 - h)
               << "\" width=\"" << px(bar_w) << "\" height=\"" << px(h) << "\" fill=\"" << colour(k) << "\"/>\n";
        }
        os << "<text x=\"" << px(x0 + group_w * (static_cast<double>(c) + 0.5)) << "\" y=\"" << px(y0 + 16)
           << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
    }
    axes(os, "", y_label);
    legend(os, series);
    os << "</svg>\n";
    return os.str();
}

std::string line_plot(const std::string& title, const std::vector<double>& x, const std::vector<Series>& series,
                      const std::string& x_label, const std::string& y_label, bool log_y) {
    std::ostringstream os;
    header(os, title);
    auto tr = [log_y](double v) { return log_y ? std::log10(v) : v; };
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series)
        for (double v : s.values)
            if (std::isfinite(v) && (!log_y || v > 0.0)) {
                lo = std::min(lo, tr(v));
                hi = std::max(hi, tr(v));
            }
    if (!(hi >= lo)) lo = 0.0, hi = 1.0;
    if (log_y) lo = std::floor(lo), hi = std::ceil(hi);
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double xmin = x.empty() ? 0.0 : x.front(), xmax = x.empty() ? 1.0 : std::max(x.back(), xmin + 1e-12);

    const double x0 = kLeft, y0 = kHeight - kBottom, plot_w = kWidth - kRight - kLeft, plot_h = y0 - kTop;
    auto sx = [&](double v) { return x0 + plot_w * (v - xmin) / (xmax - xmin); };
    auto sy = [&](double v) { return y0 - plot_h * (tr(v) - lo) / (hi - lo); };

    const int ticks = log_y ? static_cast<int>(std::min(hi - lo, 10.0)) : 5;
    for (int k = 0; k <= ticks; ++k) {
        const double v = lo + (hi - lo) * k / ticks, y = y0 - plot_h * k / ticks;
        os << "<line x1=\"" << px(x0 - 4) << "\" y1=\"" << px(y) << "\" x2=\"" << px(x0 + plot_w) << "\" y2=\""
           << px(y) << "\" stroke=\"#ddd\"/><text x=\"" << px(x0 - 6) << "\" y=\"" << px(y + 4)
           << "\" text-anchor=\"end\">" << (log_y ? "1e" + num(v) : num(v)) << "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
        const double v = xmin + (xmax - xmin) * k / 5.0;
        os << "<text x=\"" << px(sx(v)) << "\" y=\"" << px(y0 + 16) << "\" text-anchor=\"middle\">" << num(v)
           << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        os << "<polyline fill=\"none\" stroke=\"" << colour(k) << "\" stroke-width=\"1.2\" points=\"";
        const std::size_t n = std::min(x.size(), series[k].values.size());
        for (std::size_t i = 0; i < n; ++i) {
            const double v = series[k].values[i];
            if (!std::isfinite(v) || (log_y && !(v > 0.0))) continue;
            os << px(sx(x[i])) << ',' << px(sy(v)) << ' ';
        }
        os << "\"/>\n";
    }
    axes(os, x_label, y_label);
    legend(os, series);
    os << "</svg>\n";
    return os.str();
}

}  // namespace citune::cli
