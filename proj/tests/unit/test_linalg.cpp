#include "citune/linalg.hpp"
#include "citune/quadrature.hpp"
#include "citune/rk4.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace citune;

TEST(Linalg, EigenvaluesMatchJacobiOnRandomSymmetric) {
    oracle::Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = rng.integer(1, 30);
        Matrix a = rng.matrix(n, n);
        a = (0.5 * (a + a.transpose())).eval();
        const Vector ref = oracle::jacobi_eigenvalues(a);
        const Vector ev = sym_eigenvalues(a);
        ASSERT_EQ(ev.size(), n);
        EXPECT_LE((ev - ref).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.norm())) << "n=" << n;
        EXPECT_NEAR(lambda_min(a), ref(0), 1e-12 * std::max(1.0, a.norm()));
        EXPECT_NEAR(lambda_max(a), ref(n - 1), 1e-12 * std::max(1.0, a.norm()));
    }
}

TEST(Linalg, EigenpairsSatisfyDefinition) {
    oracle::Rng rng(12);
    const Matrix a = rng.spd(8, 0.1, 5.0);
    for (const EigenPair& p : {top_eigenpair(a), bottom_eigenpair(a)}) {
        EXPECT_NEAR(p.vector.norm(), 1.0, 1e-12);
        EXPECT_LE((a * p.vector - p.value * p.vector).norm(), 1e-11);
    }
    EXPECT_GT(top_eigenpair(a).value, bottom_eigenpair(a).value);
}

TEST(Linalg, NormsAndSymmetrize) {
    Matrix a(2, 2);
    a << -3, 0, 0, 2;
    EXPECT_DOUBLE_EQ(sym_norm(a), 3.0);
    Matrix r(2, 3);
    r << 3, 0, 0, 0, 4, 0;
    EXPECT_NEAR(spectral_norm(r), 4.0, 1e-14);
    Matrix b(2, 2);
    b << 1, 2, 4, 1;
    const Matrix s = symmetrize(b);
    EXPECT_DOUBLE_EQ(s(0, 1), 3.0);
    EXPECT_DOUBLE_EQ(s(1, 0), 3.0);
}

TEST(Linalg, CholeskyFailureReportsPivot) {
    EXPECT_FALSE(cholesky_failure(Matrix::Identity(3, 3)).has_value());
    Matrix a(3, 3);
    a << 1, 0, 0, 0, 1, 0, 0, 0, -1;
    ASSERT_TRUE(cholesky_failure(a).has_value());
    EXPECT_EQ(*cholesky_failure(a), 2);
    Matrix b(2, 2);
    b << 1, 2, 2, 1;  // indefinite: second pivot 1 − 4 < 0
    EXPECT_EQ(*cholesky_failure(b), 1);
    Matrix asym(2, 2);
    asym << 1, 0.5, 0, 1;
    EXPECT_TRUE(cholesky_failure(asym).has_value());
}

TEST(Linalg, KronAndBlockDiagonal) {
    Matrix a(1, 2);
    a << 1, 2;
    const Matrix k = kron(a, Matrix::Identity(2, 2));
    ASSERT_EQ(k.rows(), 2);
    ASSERT_EQ(k.cols(), 4);
    EXPECT_EQ(k(1, 3), 2.0);
    EXPECT_EQ(k(0, 1), 0.0);
    const Matrix bd = block_diagonal({Matrix::Constant(1, 1, 2.0), Matrix::Constant(2, 2, 3.0)});
    EXPECT_EQ(bd.rows(), 3);
    EXPECT_EQ(bd(0, 1), 0.0);
    EXPECT_EQ(bd(2, 1), 3.0);
}

TEST(Quadrature, SimpsonIsExactForCubics) {
    const int m = 10;
    const double h = 0.3;
    const auto w = simpson_weights(m, h);
    double acc = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double x = k * h;
        acc += w[static_cast<std::size_t>(k)] * (x * x * x - 2 * x + 1);
    }
    const double b = m * h;
    EXPECT_NEAR(acc, b * b * b * b / 4 - b * b + b, 1e-12);
    EXPECT_THROW(simpson_weights(3, h), std::invalid_argument);
}

TEST(Rk4, FourthOrderOnExponential) {
    auto solve = [](double h) {
        Vector y = Vector::Ones(1);
        const int steps = static_cast<int>(std::lround(1.0 / h));
        for (int k = 0; k < steps; ++k) y = rk4_step([](double, const Vector& v) { return Vector(-v); }, k * h, y, h);
        return std::abs(y(0) - std::exp(-1.0));
    };
    const double e1 = solve(0.1), e2 = solve(0.05);
    EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.1);
}

TEST(Rk4, SegmentsLandOnBreakpoints) {
    const std::vector<double> bps{0.25, 0.7, 3.0};
    const auto segs = aligned_segments(0.0, 1.0, 0.1, std::span<const double>(bps), [](double t) {
        return static_cast<std::size_t>(t >= 0.7 ? 2 : t >= 0.25 ? 1 : 0);
    });
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_DOUBLE_EQ(segs[0].t_end, 0.25);
    EXPECT_DOUBLE_EQ(segs[1].t_end, 0.7);
    EXPECT_EQ(segs[1].tag, 1u);
    EXPECT_DOUBLE_EQ(segs[2].node(segs[2].steps), 1.0);
    for (const auto& s : segs) EXPECT_LE(s.step(), 0.1 + 1e-12);
}
