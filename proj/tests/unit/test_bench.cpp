#include "citune/analysis.hpp"
#include "citune/bench.hpp"
#include "citune/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace citune;

TEST(Plants, InitialAcceleration) {
    MassSpringParams p;
    p.xi1_0.fill(0.0);
    p.xi2_0.fill(0.0);
    const PlantTrajectories tr = simulate_plants(p, 1.0, 5e-4);
    // agent 6 has u(0) = 1, so the acceleration is u / k1 = 1
    EXPECT_DOUBLE_EQ(mass_spring_input(5, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(tr.accel[5][0], 1.0);
}

TEST(Plants, DamperDrift) {
    MassSpringParams p;
    EXPECT_EQ(p.k3(37.0), p.k3_0);
    p.d1 = 1.0;
    EXPECT_NEAR(p.k3(50.0) - p.k3_0, 2.0 * (1.0 - std::cos(25.0)), 1e-14);
    const Vector th = p.theta(50.0);
    EXPECT_DOUBLE_EQ(th(0), 1.0);
    EXPECT_DOUBLE_EQ(th(1), p.k2);
    EXPECT_DOUBLE_EQ(th(2), p.k3(50.0));
}

TEST(Plants, HermiteInterpolationExactAtNodes) {
    const PlantTrajectories tr = simulate_plants(MassSpringParams{}, 2.0, 1e-3);
    for (std::size_t k : {0u, 17u, 2000u}) {
        const auto s = tr.state(3, tr.t[k]);
        EXPECT_EQ(s[0], tr.xi1[3][k]);
        EXPECT_EQ(s[1], tr.xi2[3][k]);
    }
    // between nodes: compare with a finer integration
    const PlantTrajectories fine = simulate_plants(MassSpringParams{}, 2.0, 1e-4);
    const auto mid = tr.state(2, 1.2345);
    const auto ref = fine.state(2, 1.2345);
    EXPECT_NEAR(mid[0], ref[0], 1e-10);
    EXPECT_NEAR(mid[1], ref[1], 1e-10);
}

TEST(Lre, IdentityHoldsAlongTrajectory) {
    MassSpringParams p;
    p.d1 = 2.0;
    auto plants = std::make_shared<const PlantTrajectories>(simulate_plants(p, 10.0, 5e-4));
    const LreData lre = extract_lre(plants);
    EXPECT_LE(lre.max_residual, 1e-10);
    for (double t : {0.0, 3.3, 9.99}) {
        for (int i = 0; i < 6; ++i) {
            const Matrix c = lre.bank.regressor(i, t);
            EXPECT_DOUBLE_EQ(c(0, 0), mass_spring_input(i, t));
        }
    }
    const auto& k = plants->t;
    for (std::size_t idx : {std::size_t{0}, k.size() / 3, k.size() - 1})
        for (int i = 0; i < 6; ++i) {
            const double y = plants->accel[static_cast<std::size_t>(i)][idx];
            EXPECT_NEAR((lre.bank.regressor(i, k[idx]) * p.theta(k[idx]))(0), y, 1e-10);
        }
}

TEST(Lre, BenchmarkBankIsExciting) {
    const Network net = benchmark_network(MassSpringParams{}, GraphSchedule::ring(6), 50.0, 1e-3);
    const ExcitationReport r = cpe_bounds(net.bank(), 0.01, 50.0, {200, 5e-4, 5e-4});
    EXPECT_GT(r.iota1_lower, 0.0);
    EXPECT_GE(r.iota1_upper, r.iota1_lower);
}

TEST(Scenarios, TableAmplitudes) {
    const auto& s1 = scenario(1);
    EXPECT_EQ(s1.d1, 0.0);
    EXPECT_EQ(s1.d2, 1.0);
    EXPECT_EQ(s1.d3, 0.5);
    const auto& s4 = scenario(4);
    const DisturbanceSpec d4 = scenario_disturbance(s4);
    for (double t : {0.3, 1.7, 12.0}) {
        const Vector v = d4.delta(t);
        EXPECT_NE(v(0), 0.0);
        EXPECT_EQ(v(1), 0.0);
        EXPECT_EQ(v(2), 0.0);
    }
    EXPECT_THROW(scenario(0), std::invalid_argument);
    EXPECT_THROW(scenario(6), std::invalid_argument);
}

TEST(Scenarios, ProjectionLayout) {
    const Network net = benchmark_network(MassSpringParams{}, GraphSchedule::ring(6), 1.0, 1e-3);
    const DisturbanceSpec d = scenario_disturbance(scenario(5));
    EXPECT_NO_THROW(d.check(net));
    const Vector v = d.delta(0.7);
    EXPECT_DOUBLE_EQ(v(0), 2.0 * std::sin(0.35));
    EXPECT_DOUBLE_EQ(v(1), std::sin(35.0));
    EXPECT_DOUBLE_EQ(v(2), 0.5 * std::sin(35.0));
    // Δ̄1 hits the damper entry of every agent
    ASSERT_EQ(d.delta1_bar.rows(), 18);
    for (int i = 0; i < 18; ++i) EXPECT_EQ(d.delta1_bar(i, 0), i % 3 == 2 ? 1.0 : 0.0);
    EXPECT_EQ(d.delta1_bar.rightCols(2).cwiseAbs().maxCoeff(), 0.0);
    const Matrix d2 = d.delta2_bar.stacked_rows(6, 24);
    EXPECT_EQ(d2.col(1).head(6), Vector::Ones(6));
    EXPECT_EQ(d2.col(1).tail(18).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d2.col(2).tail(18), Vector::Ones(18));
    const Matrix q = d.q_oe.stacked_cols(6, 24);
    ASSERT_EQ(q.rows(), 5);
    EXPECT_EQ(q.row(0).head(6), Vector::Ones(6).transpose());
    EXPECT_EQ(q.row(1).tail(18), Vector::Ones(18).transpose());
    EXPECT_EQ(q.bottomRows(3).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ((q.transpose() * d.w).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(d.w.transpose() * d.w, Matrix::Identity(3, 3));
}

TEST(Scenarios, StandardVariantLayout) {
    const DisturbanceSpec d = scenario_disturbance(scenario(2), 6, Variant::standard);
    ASSERT_EQ(d.q.rows(), 5);
    ASSERT_EQ(d.q.cols(), 18);
    EXPECT_NEAR(d.q.row(0).sum(), 1.0, 1e-15);
    EXPECT_NEAR(d.q.row(1).sum(), 1.0, 1e-15);
    EXPECT_EQ((d.q.transpose() * d.w).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Metric, Examples) {
    std::vector<double> t;
    std::vector<Vector> z, zero, delta;
    for (int k = 0; k <= 100; ++k) {
        t.push_back(0.01 * k);
        delta.push_back(Vector::Constant(2, std::sin(t.back())));
        zero.push_back(Vector::Zero(2));
    }
    EXPECT_DOUBLE_EQ(l2_metric(t, delta, delta), 1.0);
    EXPECT_EQ(l2_metric(t, zero, delta), 0.0);
    try {
        l2_metric(t, delta, zero);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_EQ(e.kind(), error_kind::metric_undefined);
    }
}

TEST(Metric, ScaleInvariant) {
    oracle::Rng rng(90);
    std::vector<double> t;
    std::vector<Vector> z, delta;
    for (int k = 0; k <= 50; ++k) {
        t.push_back(0.1 * k);
        z.push_back(rng.vector(3));
        delta.push_back(rng.vector(2));
    }
    const double base = l2_metric(t, z, delta);
    for (double c : {1e-3, 0.7, 42.0}) {
        std::vector<Vector> zs = z, ds = delta;
        for (auto& v : zs) v *= c;
        for (auto& v : ds) v *= c;
        EXPECT_NEAR(l2_metric(t, zs, ds), base, 1e-13 * base);
    }
}

TEST(Sweep, GainsAndOrdering) {
    const auto g = sweep_gains(2.0, 7, 2.0);
    ASSERT_EQ(g.size(), 7u);
    EXPECT_DOUBLE_EQ(g[3], 2.0);
    EXPECT_DOUBLE_EQ(g[0], 0.25);
    EXPECT_DOUBLE_EQ(g[6], 16.0);

    SweepResult s;
    s.gains = {0.5, 1.0, 2.0};
    s.scenarios = {1, 4, 5};
    s.metric = {{1.0, 3.0, 2.0}, {2.0, 2.0, 1.0}, {3.0, 1.0, 3.0}};
    s.average = {2.0, 5.0 / 3.0, 7.0 / 3.0};
    EXPECT_EQ(s.best_average(), 1u);
    EXPECT_EQ(s.best_for(0), 0u);
    const SweepOrdering o = check_ordering(s, 1);
    EXPECT_EQ(o.optimized_best_average, true);
    EXPECT_EQ(o.optimized_wins_s5, true);
    EXPECT_EQ(o.largest_wins_s4, true);
    EXPECT_EQ(o.lower_gain_wins_s1, true);
    // a 1% margin rejects near ties
    s.metric[2][2] = 1.005;
    EXPECT_EQ(check_ordering(s, 1).optimized_wins_s5, false);
    s.scenarios = {1, 2, 3};
    EXPECT_FALSE(check_ordering(s, 1).optimized_wins_s5.has_value());
}

TEST(Sweep, DeterministicShortRun) {
    BenchmarkOptions opt;
    opt.horizon = 3.0;
    const auto a = gain_sweep({1.0, 3.0}, {1, 4}, 1.05, opt);
    const auto b = gain_sweep({1.0, 3.0}, {1, 4}, 1.05, opt);
    EXPECT_EQ(a.metric, b.metric);
    ASSERT_EQ(a.average.size(), 2u);
    EXPECT_DOUBLE_EQ(a.average[0], 0.5 * (a.metric[0][0] + a.metric[0][1]));
    EXPECT_THROW(gain_sweep({1.0}, {1}, 1.05, opt), std::invalid_argument);
}

TEST(Network, AgentSelection) {
    const Network net = benchmark_network(MassSpringParams{}, GraphSchedule::path(3), 1.0, 1e-3, {5, 0, 2});
    EXPECT_EQ(net.agents(), 3);
    EXPECT_DOUBLE_EQ(net.bank().regressor(0, 0.3)(0, 0), mass_spring_input(5, 0.3));
    EXPECT_THROW(benchmark_network(MassSpringParams{}, GraphSchedule::path(3), 1.0, 1e-3, {0, 1}),
                 std::invalid_argument);
    EXPECT_THROW(benchmark_network(MassSpringParams{}, GraphSchedule::path(3), 1.0, 1e-3, {0, 1, 6}),
                 std::invalid_argument);
}
