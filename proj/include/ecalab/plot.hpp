#pragma once

#include <string>
#include <vector>

namespace ecalab {

// Minimal self-contained SVG line charts; no plotting backend required.
class LineChart {
public:
    LineChart(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add_series(std::string name, std::vector<double> xs, std::vector<double> ys);
    void set_y_range(double lo, double hi) {
        y_lo_ = lo;
        y_hi_ = hi;
        fixed_y_ = true;
    }
    void write_svg(const std::string& path) const;

private:
    struct Series {
        std::string name;
        std::vector<double> xs, ys;
    };
    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    double y_lo_ = 0.0, y_hi_ = 1.0;
    bool fixed_y_ = false;
};

}  // namespace ecalab
