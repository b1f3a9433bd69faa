#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rifling/errors.hpp"

namespace rifling {

inline constexpr double kDefaultPeakProminence = 0.05;

struct Peak {
    double x = 0.0;
    double height = 0.0;
    double prominence = 0.0;
    std::size_t index = 0;  // nearest sample
};

namespace detail {

// Vertex of the parabola through three points; false if they are collinear.
inline bool parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2, double& xv, double& yv) {
    const double d01 = (y1 - y0) / (x1 - x0);
    const double d12 = (y2 - y1) / (x2 - x1);
    const double c = (d12 - d01) / (x2 - x0);  // leading coefficient
    if (!(c < 0.0)) return false;
    const double b = d01 - c * (x0 + x1);
    xv = -b / (2.0 * c);
    if (xv < x0 || xv > x2) return false;
    yv = y1 + (xv - x1) * (d01 + c * (xv - x0));
    return true;
}

}  // namespace detail

/// Interior local maxima whose topographic prominence is at least
/// min_prominence times the global maximum. Flat tops count once, at their
/// middle sample.
inline std::vector<Peak> find_peaks(const std::vector<double>& y, const std::vector<double>& x,
                                    double min_prominence = kDefaultPeakProminence) {
    if (y.size() != x.size()) throw InvalidArgument("find_peaks: x and y differ in length");
    if (y.size() < 3) throw InvalidArgument("find_peaks: need at least 3 samples");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw InvalidArgument("find_peaks: x must be strictly increasing");
    for (double v : y)
        if (!std::isfinite(v)) throw InvalidArgument("find_peaks: non-finite sample");

    const std::size_t n = y.size();
    const double gmax = *std::max_element(y.begin(), y.end());
    const double threshold = min_prominence * std::abs(gmax);
    std::vector<Peak> peaks;

    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(y[i] > y[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && y[j + 1] == y[i]) ++j;
        if (j + 1 >= n || !(y[j + 1] < y[i])) {
            i = j + 1;
            continue;
        }
        const std::size_t mid = (i + j) / 2;
        const double h = y[i];

        double left_min = h;
        for (std::size_t k = i; k-- > 0;) {
            if (y[k] > h) break;
            left_min = std::min(left_min, y[k]);
        }
        double right_min = h;
        for (std::size_t k = j + 1; k < n; ++k) {
            if (y[k] > h) break;
            right_min = std::min(right_min, y[k]);
        }
        const double prominence = h - std::max(left_min, right_min);

        if (prominence >= threshold && prominence > 0.0) {
            Peak p{x[mid], h, prominence, mid};
            if (i == j) {
                double xv = 0, yv = 0;
                if (detail::parabola_vertex(x[i - 1], y[i - 1], x[i], y[i], x[i + 1], y[i + 1], xv, yv)) {
                    p.x = xv;
                    p.height = yv;
                }
            }
            peaks.push_back(p);
        }
        i = j + 1;
    }
    return peaks;
}

}  // namespace rifling
