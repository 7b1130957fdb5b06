#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace citune {

/// Composite Simpson weights for `intervals` (even) equal sub-intervals of width h.
inline std::vector<double> simpson_weights(int intervals, double h) {
    if (intervals < 2 || intervals % 2 != 0)
        throw std::invalid_argument("Simpson rule needs an even number of intervals");
    std::vector<double> w(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k) {
        const double c = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        w[static_cast<std::size_t>(k)] = c * h / 3.0;
    }
    return w;
}

/// Trapezoidal rule over arbitrary (sorted) abscissae.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& f) {
    if (t.size() != f.size()) throw std::invalid_argument("trapezoid: size mismatch");
    double acc = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) acc += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
    return acc;
}

}  // namespace citune
