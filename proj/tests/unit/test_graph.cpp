#include "citune/errors.hpp"
#include "citune/graph.hpp"
#include "citune/linalg.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace citune;

namespace {

GraphSchedule triangle() { return GraphSchedule::constant(3, {{1, 2}, {1, 3}, {2, 3}}); }

}  // namespace

TEST(Incidence, SingleEdgeColumn) {
    const auto g = GraphSchedule::constant(2, {{1, 2}});
    const Matrix d = incidence_matrix(g, 0.0);
    ASSERT_EQ(d.rows(), 2);
    ASSERT_EQ(d.cols(), 1);
    EXPECT_EQ(d(0, 0), 1.0);
    EXPECT_EQ(d(1, 0), -1.0);
}

TEST(Incidence, EmptyEdgeListGivesZeroColumns) {
    const auto g = GraphSchedule::constant(4, {});
    const Matrix d = incidence_matrix(g, 1.0);
    EXPECT_EQ(d.rows(), 4);
    EXPECT_EQ(d.cols(), 0);
    EXPECT_EQ(laplacian(g, 1.0), Matrix::Zero(4, 4));
}

TEST(Incidence, TriangleColumnsSumToZero) {
    const Matrix d = incidence_matrix(triangle(), 0.5);
    EXPECT_EQ(d.cols(), 3);
    EXPECT_EQ((d.transpose() * Vector::Ones(3)).cwiseAbs().maxCoeff(), 0.0);
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        EXPECT_EQ(d.col(j).maxCoeff(), 1.0);
        EXPECT_EQ(d.col(j).minCoeff(), -1.0);
    }
}

TEST(Incidence, ReversedEdgeIsReoriented) {
    const GraphSchedule g(2, {{0.0, {{2, 1}}}});
    EXPECT_EQ(incidence_matrix(g, 0.0)(0, 0), 1.0);
}

TEST(Incidence, RejectsNegativeTime) { EXPECT_THROW(incidence_matrix(triangle(), -0.1), std::invalid_argument); }

TEST(Schedule, RejectsMalformedInput) {
    EXPECT_THROW(GraphSchedule(3, {{0.5, {}}}), std::invalid_argument);                        // first start not 0
    EXPECT_THROW(GraphSchedule(3, {{0.0, {}}, {0.0, {}}}), std::invalid_argument);             // not increasing
    EXPECT_THROW(GraphSchedule(3, {{0.0, {{1, 1}}}}), std::invalid_argument);                  // self-loop
    EXPECT_THROW(GraphSchedule(3, {{0.0, {{1, 4}}}}), std::invalid_argument);                  // out of range
    EXPECT_THROW(GraphSchedule(3, {{0.0, {{1, 2}, {2, 1}}}}), std::invalid_argument);          // duplicate
    EXPECT_THROW(GraphSchedule(0, {{0.0, {}}}), std::invalid_argument);
}

TEST(Schedule, IntervalLookup) {
    const GraphSchedule g(3, {{0.0, {{1, 2}}}, {1.0, {{2, 3}}}, {2.5, {}}});
    EXPECT_EQ(g.interval_index(0.0), 0u);
    EXPECT_EQ(g.interval_index(0.999), 0u);
    EXPECT_EQ(g.interval_index(1.0), 1u);
    EXPECT_EQ(g.interval_index(100.0), 2u);
    EXPECT_EQ(g.edge_count(3.0), 0);
    EXPECT_EQ(g.max_edge_count(), 1);
    EXPECT_EQ(g.breakpoints(), (std::vector<double>{1.0, 2.5}));
}

TEST(Laplacian, SingleEdge) {
    Matrix expected(2, 2);
    expected << 1, -1, -1, 1;
    EXPECT_EQ(laplacian(GraphSchedule::constant(2, {{1, 2}}), 0.0), expected);
}

TEST(Laplacian, Triangle) {
    Matrix expected(3, 3);
    expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
    EXPECT_EQ(laplacian(triangle(), 0.0), expected);
}

TEST(Laplacian, PathEigenvalues) {
    const Vector ev = oracle::jacobi_eigenvalues(laplacian(GraphSchedule::path(3), 0.0));
    EXPECT_NEAR(ev(0), 0.0, 1e-14);
    EXPECT_NEAR(ev(1), 1.0, 1e-14);
    EXPECT_NEAR(ev(2), 3.0, 1e-14);
}

TEST(Laplacian, RingAndPathFactories) {
    EXPECT_EQ(GraphSchedule::ring(6).edge_count(0.0), 6);
    EXPECT_EQ(GraphSchedule::path(6).edge_count(0.0), 5);
    EXPECT_EQ(GraphSchedule::ring(2).edge_count(0.0), 1);
}

TEST(Laplacian, PropertiesOnRandomSchedules) {
    oracle::Rng rng(21);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = rng.integer(2, 8);
        const auto g = rng.schedule(n, rng.integer(1, 6), 0.1, 1.0);
        for (int s = 0; s < 10; ++s) {
            const double t = rng.uniform(0.0, 6.0);
            const Matrix d = incidence_matrix(g, t);
            const Matrix l = laplacian(g, t);
            EXPECT_EQ(l, d * d.transpose());  // integer entries: exact
            EXPECT_EQ(l, oracle::adjacency_laplacian(n, oracle::interval_at(g, t).edges));
            EXPECT_EQ((l * Vector::Ones(n)).cwiseAbs().maxCoeff(), 0.0);
            EXPECT_NEAR(oracle::jacobi_eigenvalues(l)(0), 0.0, 1e-12);
            // consensus vectors lie in the kernel of (Dᵀ ⊗ I)
            const int np = rng.integer(1, 4);
            const Vector theta = rng.vector(np);
            const Vector x = theta.replicate(n, 1);
            EXPECT_EQ((kron(d.transpose(), Matrix::Identity(np, np)) * x).norm(), 0.0);
        }
    }
}

TEST(IntegratedLaplacian, ConstantGraph) {
    const auto g = GraphSchedule::ring(5);
    EXPECT_LE((integrated_laplacian(g, 0.0, 2.0) - 2.0 * laplacian(g, 0.0)).norm(), 1e-14);
}

TEST(IntegratedLaplacian, EdgeActiveOnFirstSecondOnly) {
    const GraphSchedule g(2, {{0.0, {{1, 2}}}, {1.0, {}}});
    EXPECT_LE((integrated_laplacian(g, 0.0, 2.0) - laplacian(g, 0.0)).norm(), 1e-14);
}

TEST(IntegratedLaplacian, RejectsEmptyWindow) {
    EXPECT_THROW(integrated_laplacian(GraphSchedule::ring(3), 1.0, 1.0), std::invalid_argument);
}

TEST(IntegratedLaplacian, AlternatingRingPathMatchesRiemann) {
    std::vector<GraphInterval> iv;
    const auto ring = GraphSchedule::ring(5).intervals().front().edges;
    const auto path = GraphSchedule::path(5).intervals().front().edges;
    for (int k = 0; k < 8; ++k) iv.push_back({0.5 * k, k % 2 == 0 ? ring : path});
    const GraphSchedule g(5, iv);
    const Matrix exact = integrated_laplacian(g, 0.13, 3.37);
    const Matrix ref = oracle::riemann_integrated_laplacian(g, 0.13, 3.37, 1e-4);
    EXPECT_LE((exact - ref).norm(), 1e-9);
}

TEST(IntegratedLaplacian, AdditiveOverAdjacentWindows) {
    oracle::Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = rng.schedule(rng.integer(2, 6), 5, 0.2, 1.0);
        const double a = rng.uniform(0.0, 1.0), b = a + rng.uniform(0.1, 2.0), c = b + rng.uniform(0.1, 2.0);
        const Matrix lhs = integrated_laplacian(g, a, b) + integrated_laplacian(g, b, c);
        EXPECT_LE((lhs - integrated_laplacian(g, a, c)).norm(), 1e-12);
    }
}

TEST(Connectivity, ConstantRing) {
    const auto g = GraphSchedule::ring(6);
    const double lambda2 = oracle::jacobi_eigenvalues(laplacian(g, 0.0))(1);
    for (double window : {0.01, 0.5, 3.0}) {
        const SpectralBounds b = connectivity_on_average(g, window);
        EXPECT_NEAR(b.lambda_lower, window * lambda2, 1e-9);
        EXPECT_NEAR(b.r3, 4.0, 1e-12);
        EXPECT_GE(b.r3, b.lambda_lower);
    }
}

TEST(Connectivity, IsolatedNodeIsRejected) {
    const auto g = GraphSchedule::constant(4, {{1, 2}, {2, 3}});
    try {
        connectivity_on_average(g, 1.0);
        FAIL() << "expected not_connected";
    } catch (const DomainError& e) {
        EXPECT_EQ(e.kind(), error_kind::not_connected);
    }
}

TEST(Connectivity, AlternatingTreesConnectedOnAverage) {
    // Neither interval is connected alone; their union is the 4-path.
    const GraphSchedule g(4, {{0.0, {{1, 2}, {3, 4}}}, {1.0, {{2, 3}}}, {2.0, {{1, 2}, {3, 4}}}, {3.0, {{2, 3}}}});
    ConnectivityOptions opt;
    opt.horizon = 4.0;
    const SpectralBounds b = connectivity_on_average(g, 2.0, opt);
    // the tightest window splits the time evenly: λ₂ of (L_a + L_b)
    const double ref = oracle::jacobi_eigenvalues(integrated_laplacian(g, 0.0, 2.0))(1);
    EXPECT_GT(b.lambda_lower, 0.0);
    EXPECT_LE(b.lambda_lower, ref + 1e-12);
    EXPECT_THROW(connectivity_on_average(g, 0.5, opt), DomainError);
}

TEST(Connectivity, RejectsNonPositiveWindow) {
    EXPECT_THROW(connectivity_on_average(GraphSchedule::ring(3), 0.0), std::invalid_argument);
}
