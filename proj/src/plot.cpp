#include "ecalab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ecalab {

namespace {

constexpr int kWidth = 720, kHeight = 440;
constexpr int kLeft = 70, kRight = 160, kTop = 50, kBottom = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

}  // namespace

void LineChart::add_series(std::string name, std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("LineChart: series needs matching non-empty x/y");
    series_.push_back(Series{std::move(name), std::move(xs), std::move(ys)});
}

void LineChart::write_svg(const std::string& path) const {
    if (series_.empty()) throw std::invalid_argument("LineChart: nothing to plot");

    double x_lo = series_[0].xs[0], x_hi = x_lo;
    double y_lo = y_lo_, y_hi = y_hi_;
    if (!fixed_y_) {
        y_lo = series_[0].ys[0];
        y_hi = y_lo;
    }
    for (const Series& s : series_) {
        for (double x : s.xs) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
        }
        if (!fixed_y_)
            for (double y : s.ys) {
                y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y);
            }
    }
    if (x_hi == x_lo) x_hi = x_lo + 1;
    if (y_hi == y_lo) y_hi = y_lo + 1;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
        << "' viewBox='0 0 " << kWidth << ' ' << kHeight << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << kWidth / 2 << "' y='24' text-anchor='middle' font-size='16' "
        << "font-family='sans-serif'>" << title_ << "</text>\n";

    // axes + ticks
    svg << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << plot_w << "' height='"
        << plot_h << "' fill='none' stroke='#333'/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = x_lo + (x_hi - x_lo) * i / 5.0;
        const double fy = y_lo + (y_hi - y_lo) * i / 5.0;
        svg << "<line x1='" << px(fx) << "' y1='" << kTop + plot_h << "' x2='" << px(fx) << "' y2='"
            << kTop + plot_h + 5 << "' stroke='#333'/>\n"
            << "<text x='" << px(fx) << "' y='" << kTop + plot_h + 20
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << fmt(fx)
            << "</text>\n"
            << "<line x1='" << kLeft - 5 << "' y1='" << py(fy) << "' x2='" << kLeft << "' y2='"
            << py(fy) << "' stroke='#333'/>\n"
            << "<text x='" << kLeft - 9 << "' y='" << py(fy) + 4
            << "' text-anchor='end' font-size='11' font-family='sans-serif'>" << fmt(fy)
            << "</text>\n";
    }
    svg << "<text x='" << kLeft + plot_w / 2 << "' y='" << kHeight - 14
        << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << x_label_
        << "</text>\n"
        << "<text x='18' y='" << kTop + plot_h / 2
        << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 "
        << "18 " << kTop + plot_h / 2 << ")'>" << y_label_ << "</text>\n";

    for (size_t si = 0; si < series_.size(); ++si) {
        const Series& s = series_[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.8' points='";
        for (size_t i = 0; i < s.xs.size(); ++i) svg << px(s.xs[i]) << ',' << py(s.ys[i]) << ' ';
        svg << "'/>\n";
        for (size_t i = 0; i < s.xs.size(); ++i)
            svg << "<circle cx='" << px(s.xs[i]) << "' cy='" << py(s.ys[i]) << "' r='2.4' fill='"
                << color << "'/>\n";
        const double ly = kTop + 16 + 18.0 * static_cast<double>(si);
        svg << "<line x1='" << kWidth - kRight + 12 << "' y1='" << ly << "' x2='"
            << kWidth - kRight + 34 << "' y2='" << ly << "' stroke='" << color
            << "' stroke-width='2'/>\n"
            << "<text x='" << kWidth - kRight + 40 << "' y='" << ly + 4
            << "' font-size='12' font-family='sans-serif'>" << s.name << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot write plot");
    out << svg.str();
    if (!out.flush()) throw std::runtime_error(path + ": write failed");
}

}  // namespace ecalab
