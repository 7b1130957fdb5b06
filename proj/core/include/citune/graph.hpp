#pragma once

#include "citune/linalg.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace citune {

/// Undirected edge between 1-based node indices, stored with source < sink.
struct Edge {
    int source = 0;
    int sink = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct GraphInterval {
    double t_start = 0.0;
    std::vector<Edge> edges;
};

/// Piecewise-constant, time-varying undirected graph. Interval k is active on
/// [t_start_k, t_start_{k+1}); the last interval extends indefinitely.
///
/// Invariants (checked on construction): first t_start is 0, starts strictly
/// increase, node indices lie in [1, n], no self-loops and no duplicate edges
/// inside an interval. Edges given as (j, i) with j > i are stored as (i, j):
/// the lower index is the source of the oriented incidence matrix.
class GraphSchedule {
public:
    GraphSchedule(int node_count, std::vector<GraphInterval> intervals);

    /// Same edge set for all t >= 0.
    static GraphSchedule constant(int node_count, std::vector<Edge> edges);
    static GraphSchedule ring(int node_count);
    static GraphSchedule path(int node_count);

    int node_count() const { return n_; }
    const std::vector<GraphInterval>& intervals() const { return intervals_; }
    std::size_t interval_count() const { return intervals_.size(); }

    /// Index of the interval active at time t. Rejects t < 0.
    std::size_t interval_index(double t) const;
    const GraphInterval& interval_at(double t) const { return intervals_[interval_index(t)]; }
    int edge_count(double t) const { return static_cast<int>(interval_at(t).edges.size()); }
    int max_edge_count() const;

    /// Interval start times after the first (t = 0).
    std::vector<double> breakpoints() const;

    /// Oriented incidence matrix of interval k (n × n_e): source +1, sink −1.
    const Matrix& incidence(std::size_t k) const { return incidence_[k]; }
    const Matrix& laplacian(std::size_t k) const { return laplacian_[k]; }

private:
    int n_;
    std::vector<GraphInterval> intervals_;
    std::vector<Matrix> incidence_;
    std::vector<Matrix> laplacian_;
};

struct SpectralBounds {
    double r3 = 0.0;            ///< sup_t ‖L(t)‖
    double lambda_lower = 0.0;  ///< min over windows of λ₂(∫L ds)
    double window = 0.0;        ///< T
};

Matrix incidence_matrix(const GraphSchedule& g, double t);
Matrix laplacian(const GraphSchedule& g, double t);

/// Exact ∫_{t0}^{t1} L(s) ds (sum of interval-length-weighted Laplacians).
Matrix integrated_laplacian(const GraphSchedule& g, double t0, double t1);

struct ConnectivityOptions {
    /// Windows are sampled at every kink of t ↦ ∫_{t-T}^t L plus this many
    /// uniformly spaced end times over [T, horizon].
    int grid_samples = 100;
    /// Horizon for the uniform grid; <= 0 means last breakpoint + 2T.
    double horizon = 0.0;
    /// Eigenvalues below tol·trace count as zero.
    double zero_tolerance = 1e-9;
};

/// Verifies that every sampled ∫_{t-T}^t L ds has exactly one (near-)zero
/// eigenvalue. Throws DomainError(not_connected) naming the first offending
/// window otherwise.
SpectralBounds connectivity_on_average(const GraphSchedule& g, double window,
                                       const ConnectivityOptions& options = {});

}  // namespace citune
