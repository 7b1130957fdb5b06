#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace citune {

/// One classical fourth-order Runge–Kutta step for y' = f(t, y).
/// `State` is any Eigen dense type; `f` returns something assignable to it.
template <typename State, typename Rhs>
State rk4_step(const Rhs& f, double t, const State& y, double h) {
    const State k1 = f(t, y);
    const State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
    const State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
    const State k4 = f(t + h, State(y + h * k3));
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct StepSegment {
    double t_begin = 0.0;
    double t_end = 0.0;
    int steps = 0;
    std::size_t tag = 0;  // caller-defined, e.g. graph interval index

    double step() const { return (t_end - t_begin) / steps; }
    double node(int k) const { return k == steps ? t_end : t_begin + k * step(); }
};

/// Splits [t0, t1] at every breakpoint strictly inside it so that no step
/// straddles a breakpoint. Each segment gets ceil(len/h) equal steps (rounded
/// up to an even count when `even` is set, for Simpson quadrature).
/// Breakpoints must be sorted; `tag_of(t)` labels the segment starting at t.
template <typename TagFn>
std::vector<StepSegment> aligned_segments(double t0, double t1, double h,
                                          std::span<const double> breakpoints,
                                          const TagFn& tag_of, bool even = false) {
    if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
    if (!(t1 > t0)) throw std::invalid_argument("empty integration interval");
    std::vector<double> cuts{t0};
    for (double b : breakpoints)
        if (b > t0 && b < t1) cuts.push_back(b);
    cuts.push_back(t1);

    std::vector<StepSegment> out;
    out.reserve(cuts.size() - 1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double len = cuts[i + 1] - cuts[i];
        int steps = static_cast<int>(std::ceil(len / h - 1e-9));
        if (steps < 1) steps = 1;
        if (even && steps % 2 != 0) ++steps;
        out.push_back({cuts[i], cuts[i + 1], steps, tag_of(cuts[i])});
    }
    return out;
}

}  // namespace citune
