#include "citune/graph.hpp"

#include "citune/errors.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace citune {

GraphSchedule::GraphSchedule(int node_count, std::vector<GraphInterval> intervals)
    : n_(node_count), intervals_(std::move(intervals)) {
    if (n_ < 1) throw std::invalid_argument("graph: node count must be positive");
    if (intervals_.empty()) throw std::invalid_argument("graph: at least one interval is required");
    if (intervals_.front().t_start != 0.0) throw std::invalid_argument("graph: first interval must start at t = 0");

    for (std::size_t k = 0; k < intervals_.size(); ++k) {
        auto& iv = intervals_[k];
        if (!std::isfinite(iv.t_start)) throw std::invalid_argument("graph: non-finite interval start");
        if (k > 0 && !(iv.t_start > intervals_[k - 1].t_start))
            throw std::invalid_argument("graph: interval starts must be strictly increasing");

        std::set<std::pair<int, int>> seen;
        for (auto& e : iv.edges) {
            if (e.source < 1 || e.source > n_ || e.sink < 1 || e.sink > n_) {
                std::ostringstream os;
                os << "graph: edge (" << e.source << "," << e.sink << ") in interval " << k
                   << " references a node outside [1, " << n_ << "]";
                throw std::invalid_argument(os.str());
            }
            if (e.source == e.sink) {
                std::ostringstream os;
                os << "graph: self-loop at node " << e.source << " in interval " << k;
                throw std::invalid_argument(os.str());
            }
            if (e.source > e.sink) std::swap(e.source, e.sink);
            if (!seen.emplace(e.source, e.sink).second) {
                std::ostringstream os;
                os << "graph: duplicate edge (" << e.source << "," << e.sink << ") in interval " << k;
                throw std::invalid_argument(os.str());
            }
        }

        Matrix d = Matrix::Zero(n_, static_cast<Eigen::Index>(iv.edges.size()));
        for (std::size_t l = 0; l < iv.edges.size(); ++l) {
            d(iv.edges[l].source - 1, static_cast<Eigen::Index>(l)) = 1.0;
            d(iv.edges[l].sink - 1, static_cast<Eigen::Index>(l)) = -1.0;
        }
        laplacian_.push_back(d * d.transpose());
        incidence_.push_back(std::move(d));
    }
}

GraphSchedule GraphSchedule::constant(int node_count, std::vector<Edge> edges) {
    return GraphSchedule(node_count, {GraphInterval{0.0, std::move(edges)}});
}

GraphSchedule GraphSchedule::ring(int node_count) {
    std::vector<Edge> edges;
    for (int i = 1; i < node_count; ++i) edges.push_back({i, i + 1});
    if (node_count > 2) edges.push_back({1, node_count});
    return constant(node_count, std::move(edges));
}

GraphSchedule GraphSchedule::path(int node_count) {
    std::vector<Edge> edges;
    for (int i = 1; i < node_count; ++i) edges.push_back({i, i + 1});
    return constant(node_count, std::move(edges));
}

std::size_t GraphSchedule::interval_index(double t) const {
    if (!(t >= 0.0)) throw std::invalid_argument("graph: time precedes the first interval");
    auto it = std::upper_bound(intervals_.begin(), intervals_.end(), t,
                               [](double v, const GraphInterval& iv) { return v < iv.t_start; });
    return static_cast<std::size_t>(std::distance(intervals_.begin(), it)) - 1;
}

int GraphSchedule::max_edge_count() const {
    std::size_t m = 0;
    for (const auto& iv : intervals_) m = std::max(m, iv.edges.size());
    return static_cast<int>(m);
}

std::vector<double> GraphSchedule::breakpoints() const {
    std::vector<double> out;
    for (std::size_t k = 1; k < intervals_.size(); ++k) out.push_back(intervals_[k].t_start);
    return out;
}

Matrix incidence_matrix(const GraphSchedule& g, double t) { return g.incidence(g.interval_index(t)); }

Matrix laplacian(const GraphSchedule& g, double t) { return g.laplacian(g.interval_index(t)); }

Matrix integrated_laplacian(const GraphSchedule& g, double t0, double t1) {
    if (!(t1 > t0)) throw std::invalid_argument("integrated_laplacian: t1 must exceed t0");
    if (!(t0 >= 0.0)) throw std::invalid_argument("integrated_laplacian: t0 must be non-negative");
    const auto& iv = g.intervals();
    Matrix acc = Matrix::Zero(g.node_count(), g.node_count());
    for (std::size_t k = g.interval_index(t0); k < iv.size(); ++k) {
        const double a = std::max(t0, iv[k].t_start);
        const double b = (k + 1 < iv.size()) ? std::min(t1, iv[k + 1].t_start) : t1;
        if (b > a) acc += (b - a) * g.laplacian(k);
        if (k + 1 < iv.size() && iv[k + 1].t_start >= t1) break;
    }
    return acc;
}

SpectralBounds connectivity_on_average(const GraphSchedule& g, double window,
                                       const ConnectivityOptions& options) {
    if (!(window > 0.0)) throw std::invalid_argument("connectivity_on_average: window must be positive");

    SpectralBounds out;
    out.window = window;
    for (std::size_t k = 0; k < g.interval_count(); ++k)
        out.r3 = std::max(out.r3, g.laplacian(k).size() ? lambda_max(g.laplacian(k)) : 0.0);

    const auto bps = g.breakpoints();
    const double horizon = options.horizon > 0.0
                               ? options.horizon
                               : (bps.empty() ? 2.0 * window : bps.back() + 2.0 * window);

    // λ₂ of the windowed integral is concave between kinks (t or t−T crossing
    // a breakpoint), so the kinks plus the ends locate the exact minimum.
    std::vector<double> ends{window, std::max(window, horizon)};
    for (double b : bps) {
        ends.push_back(b);
        ends.push_back(b + window);
    }
    const int grid = std::max(options.grid_samples, 0);
    for (int k = 0; k < grid; ++k)
        ends.push_back(window + (grid == 1 ? 0.0 : (horizon - window) * k / (grid - 1)));
    std::sort(ends.begin(), ends.end());
    ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

    // A single node has no disagreement directions.
    out.lambda_lower = std::numeric_limits<double>::infinity();
    if (g.node_count() == 1) return out;

    for (double t : ends) {
        if (t < window || t > std::max(window, horizon)) continue;
        const Matrix integral = integrated_laplacian(g, t - window, t);
        const Vector ev = sym_eigenvalues(integral);
        const double tol = options.zero_tolerance * std::max(integral.trace(), 1e-300);
        int zeros = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev(i) < tol) ++zeros;
        if (zeros != 1) {
            std::ostringstream os;
            os << "graph is not connected on average: window [" << t - window << ", " << t << "] has "
               << zeros << " zero eigenvalues";
            throw DomainError(error_kind::not_connected, os.str());
        }
        out.lambda_lower = std::min(out.lambda_lower, ev(1));
    }
    return out;
}

}  // namespace citune
