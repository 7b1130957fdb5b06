#include "citune/bench.hpp"
#include "citune/errors.hpp"
#include "citune/estimator.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace citune;

namespace {

Network scalar_network(double c = 1.0) {
    return Network(RegressorBank({std::make_shared<ConstantRegressor>(Matrix::Constant(1, 1, c))}),
                   GraphSchedule::constant(1, {}));
}

EstimatorConfig scalar_config(double g, double step, double horizon) {
    return {Matrix::Constant(1, 1, g), 1.0, step, horizon};
}

Network random_network(oracle::Rng& rng, int n, Eigen::Index ny, Eigen::Index np) {
    return Network(rng.bank(n, ny, np), rng.schedule(n, 4, 0.3, 1.0));
}

Vector measurements(const Network& net, double t, const Vector& theta) {
    return net.bank().stacked(t) * theta.replicate(net.agents(), 1);
}

}  // namespace

TEST(Config, ValidationRejectsBadInput) {
    const Matrix g = Matrix::Identity(6, 6);
    EXPECT_NO_THROW(validate_config({g, 1.0, 1e-3, 1.0}, 2, 3));
    EXPECT_THROW(validate_config({g, 0.0, 1e-3, 1.0}, 2, 3), std::invalid_argument);
    EXPECT_THROW(validate_config({g, -1.0, 1e-3, 1.0}, 2, 3), std::invalid_argument);
    EXPECT_THROW(validate_config({g, 1.0, 0.0, 1.0}, 2, 3), std::invalid_argument);
    EXPECT_THROW(validate_config({g, 1.0, 1e-3, 1e-4}, 2, 3), std::invalid_argument);
    Matrix coupled = g;
    coupled(0, 4) = coupled(4, 0) = 0.1;
    EXPECT_THROW(validate_config({coupled, 1.0, 1e-3, 1.0}, 2, 3), std::invalid_argument);
    Matrix indefinite = g;
    indefinite(4, 4) = -1.0;
    try {
        validate_config({indefinite, 1.0, 1e-3, 1.0}, 2, 3);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("block 2"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("pivot 2"), std::string::npos);
    }
}

TEST(Config, UniformGainIsBlockDiagonal) {
    const Matrix g = uniform_gain(3, 2.0 * Matrix::Identity(2, 2));
    EXPECT_EQ(g, 2.0 * Matrix::Identity(6, 6));
    EXPECT_DOUBLE_EQ((EstimatorConfig{g, 1.0, 1e-3, 1.0}).r1(), 2.0);
}

TEST(Network, RejectsNodeCountMismatch) {
    oracle::Rng rng(40);
    EXPECT_THROW(Network(rng.bank(3, 1, 2), GraphSchedule::ring(4)), std::invalid_argument);
}

TEST(Lambda, SingleAgentIsRegressor) {
    const Network net = scalar_network(2.5);
    const OutputMap m = assemble_lambda(net, 1.0, 0.3);
    ASSERT_EQ(m.lambda.rows(), 1);
    EXPECT_EQ(m.lambda(0, 0), 2.5);
    EXPECT_EQ(m.edges, 0);
}

TEST(Lambda, ConsensusVectorHasZeroBottomBlock) {
    oracle::Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const Network net = random_network(rng, rng.integer(2, 6), 1, rng.integer(1, 4));
        const double t = rng.uniform(0.0, 3.0), alpha = rng.uniform(0.1, 5.0);
        const Vector x = rng.vector(net.parameters()).replicate(net.agents(), 1);
        const OutputMap m = assemble_lambda(net, alpha, t);
        if (m.consensus_rows() > 0) {
            EXPECT_EQ((m.consensus_block() * x).cwiseAbs().maxCoeff(), 0.0);
        }
    }
}

TEST(Lambda, GramEqualsInformationMatrix) {
    const Network net = benchmark_network(MassSpringParams{}, GraphSchedule::ring(6), 1.0, 1e-3);
    const OutputMap m = assemble_lambda(net, 1.05, 0.0);
    EXPECT_EQ(m.lambda.rows(), 6 + 3 * 6);
    const Matrix ref = oracle::information(net.bank(), net.graph(), 1.05, 0.0);
    EXPECT_LE((m.lambda.transpose() * m.lambda - ref).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((net.information(0.0, 1.05) - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lambda, RowCountTracksEdges) {
    const Network net(oracle::Rng(42).bank(3, 1, 2), GraphSchedule(3, {{0.0, {{1, 2}}}, {1.0, {{1, 2}, {2, 3}}}}));
    EXPECT_EQ(assemble_lambda(net, 1.0, 0.5).lambda.rows(), 3 + 2);
    EXPECT_EQ(assemble_lambda(net, 1.0, 1.0).lambda.rows(), 3 + 4);
}

TEST(Rhs, EquilibriumAtConsensusTruth) {
    oracle::Rng rng(43);
    const Network net = random_network(rng, 4, 2, 3);
    const EstimatorConfig cfg{rng.spd(3, 0.5, 2.0), 1.3, 1e-3, 1.0};
    const EstimatorConfig full{uniform_gain(4, cfg.gamma_bar), 1.3, 1e-3, 1.0};
    const Vector theta = rng.vector(3);
    const Vector rhs = ci_rhs(theta.replicate(4, 1), 0.7, full, net, measurements(net, 0.7, theta));
    EXPECT_LE(rhs.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Rhs, ScalarGradientFlow) {
    const Network net(RegressorBank({std::make_shared<ConstantRegressor>(Matrix::Identity(3, 3))}),
                      GraphSchedule::constant(1, {}));
    const EstimatorConfig cfg{Matrix::Identity(3, 3), 1.0, 1e-3, 1.0};
    const Vector theta = Vector::LinSpaced(3, 1.0, 3.0), x = Vector::Constant(3, 0.5);
    EXPECT_LE((ci_rhs(x, 0.0, cfg, net, theta) + (x - theta)).norm(), 1e-15);
}

TEST(Rhs, BothFormulationsAgree) {
    oracle::Rng rng(44);
    const Network net = random_network(rng, 5, 2, 3);
    for (int trial = 0; trial < 1000; ++trial) {
        Matrix g = Matrix::Zero(15, 15);
        for (int i = 0; i < 5; ++i) g.block(3 * i, 3 * i, 3, 3) = rng.spd(3, 0.2, 3.0);
        const EstimatorConfig c{g, rng.uniform(0.1, 4.0), 1e-3, 1.0};
        const double t = rng.uniform(0.0, 4.0);
        const Vector x = rng.vector(15, -10.0, 10.0), y1 = rng.vector(10);
        const Vector a = ci_rhs(x, t, c, net, y1), b = ci_rhs_gradient(x, t, c, net, y1);
        ASSERT_LE((a - b).norm(), 1e-10 * (1.0 + x.norm()));
    }
}

TEST(Rhs, AffineDisturbance) {
    const Network net = scalar_network(2.0);
    const EstimatorConfig cfg = scalar_config(0.5, 1e-3, 1.0);
    const Vector x = Vector::Constant(1, 0.3), zero = Vector::Zero(1);
    EXPECT_DOUBLE_EQ(affine_disturbed_rhs(x, 0.0, cfg, net, zero)(0), -0.5 * 4.0 * 0.3);
    // steady state x* = δ / (g C²)
    const Vector d = Vector::Constant(1, 0.8);
    EXPECT_NEAR(affine_disturbed_rhs(Vector::Constant(1, 0.8 / (0.5 * 4.0)), 0.0, cfg, net, d)(0), 0.0, 1e-15);
}

TEST(Nominal, EquilibriumStaysPut) {
    oracle::Rng rng(45);
    const Network net = random_network(rng, 3, 1, 2);
    const EstimatorConfig cfg{Matrix::Identity(6, 6), 1.0, 1e-2, 3.0};
    const Vector theta = rng.vector(2);
    const NominalTrajectory tr = simulate_nominal(cfg, net, theta.replicate(3, 1), theta);
    for (const auto& x : tr.x_tilde) EXPECT_LE(x.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Nominal, ScalarClosedForm) {
    const double g = 1.7, e0 = 0.9;
    const EstimatorConfig cfg = scalar_config(g, 1e-3, 2.0);
    const NominalTrajectory tr =
        simulate_nominal(cfg, scalar_network(), Vector::Constant(1, 1.0 + e0), Vector::Constant(1, 1.0));
    ASSERT_EQ(tr.t.size(), 2001u);
    for (std::size_t k = 0; k < tr.t.size(); k += 100)
        EXPECT_NEAR(tr.x_tilde[k](0), e0 * std::exp(-g * tr.t[k]), 1e-8);
}

TEST(Nominal, Rk4OrderOnScalarCase) {
    auto end_error = [](double h) {
        const NominalTrajectory tr = simulate_nominal(scalar_config(3.0, h, 1.0), scalar_network(),
                                                      Vector::Constant(1, 1.0), Vector::Zero(1));
        return std::abs(tr.x_tilde.back()(0) - std::exp(-3.0));
    };
    const double ratio = end_error(0.05) / end_error(0.025);
    EXPECT_NEAR(std::log2(ratio), 4.0, 0.15);
}

TEST(Nominal, StepsLandOnBreakpoints) {
    oracle::Rng rng(46);
    const Network net(rng.bank(3, 1, 2), GraphSchedule(3, {{0.0, {{1, 2}}}, {0.3337, {{2, 3}}}, {0.71, {}}}));
    const EstimatorConfig cfg{Matrix::Identity(6, 6), 1.0, 0.1, 1.0};
    const NominalTrajectory tr = simulate_nominal(cfg, net, rng.vector(6), rng.vector(2));
    auto has = [&](double t) { return std::find(tr.t.begin(), tr.t.end(), t) != tr.t.end(); };
    EXPECT_TRUE(has(0.3337));
    EXPECT_TRUE(has(0.71));
    EXPECT_DOUBLE_EQ(tr.t.back(), 1.0);
}

TEST(Nominal, DivergenceIsReported) {
    // Γ with a huge gain and a coarse step makes RK4 blow up.
    const EstimatorConfig cfg = scalar_config(1e4, 0.1, 50.0);
    try {
        simulate_nominal(cfg, scalar_network(), Vector::Constant(1, 1.0), Vector::Zero(1));
        FAIL() << "expected divergence";
    } catch (const DomainError& e) {
        EXPECT_EQ(e.kind(), error_kind::non_finite);
        EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    }
}

TEST(Nominal, Deterministic) {
    oracle::Rng rng(47);
    const Network net = random_network(rng, 4, 1, 2);
    const EstimatorConfig cfg{Matrix::Identity(8, 8), 0.7, 1e-2, 2.0};
    const Vector x0 = rng.vector(8), theta = rng.vector(2);
    const auto a = simulate_nominal(cfg, net, x0, theta), b = simulate_nominal(cfg, net, x0, theta);
    EXPECT_EQ(a.x_hat.back(), b.x_hat.back());
}

namespace {

DisturbanceSpec zero_projection_spec(const Network& net, std::function<Vector(double)> delta) {
    DisturbanceSpec d;
    d.size = 2;
    d.delta = std::move(delta);
    d.delta1_bar = Matrix::Zero(net.state_size(), 2);
    d.delta2_bar.measurement = Matrix::Zero(net.measurement_rows(), 2);
    d.delta2_bar.per_edge = Matrix::Zero(net.parameters(), 2);
    d.variant = Variant::standard;
    d.q = Matrix::Zero(3, net.state_size());
    d.q(0, 0) = 1.0;
    d.w = Matrix::Zero(3, 2);
    d.w.bottomRows(2).setIdentity();
    return d;
}

}  // namespace

TEST(Disturbed, ZeroDisturbanceOrProjectionReducesToNominal) {
    oracle::Rng rng(48);
    const Network net = random_network(rng, 3, 1, 2);
    const EstimatorConfig cfg{Matrix::Identity(6, 6), 1.0, 1e-2, 2.0};
    const Vector x0 = rng.vector(6), theta = rng.vector(2);
    const auto nominal = simulate_nominal(cfg, net, x0, theta);
    const Vector e0 = x0 - theta.replicate(3, 1);
    for (auto delta : {std::function<Vector(double)>([](double) { return Vector(Vector::Zero(2)); }),
                       std::function<Vector(double)>([](double t) { return Vector(Vector::Constant(2, std::sin(t))); })}) {
        const auto dist = simulate_disturbed(cfg, net, zero_projection_spec(net, delta), e0);
        ASSERT_EQ(dist.t.size(), nominal.t.size());
        for (std::size_t k = 0; k < dist.t.size(); ++k)
            EXPECT_LE((dist.x_tilde[k] - nominal.x_tilde[k]).norm(), 1e-12);
        // z = Q x̃ + W δ
        EXPECT_NEAR(dist.z.back()(0), dist.x_tilde.back()(0), 1e-15);
        EXPECT_EQ(dist.z.back().tail(2), dist.delta.back());
    }
}

TEST(Disturbed, RejectsInconsistentSpec) {
    oracle::Rng rng(49);
    const Network net = random_network(rng, 3, 1, 2);
    DisturbanceSpec d = zero_projection_spec(net, [](double) { return Vector(Vector::Zero(2)); });
    d.delta1_bar = Matrix::Zero(5, 2);
    EXPECT_THROW(d.check(net), std::invalid_argument);
}

TEST(Disturbed, ScenarioTwoMetricIsFiniteAndReproducible) {
    const Scenario& s = scenario(2);
    BenchmarkOptions opt;
    opt.horizon = 10.0;
    const Network net = benchmark_network(opt.plant, opt.graph, opt.horizon, opt.step);
    const Matrix g = 2.0 * Matrix::Identity(18, 18);
    const double a = scenario_metric(net, s, g, 1.05, opt), b = scenario_metric(net, s, g, 1.05, opt);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_GT(a, 0.0);
    EXPECT_EQ(a, b);
}

TEST(Variant, ParseAndPrint) {
    EXPECT_EQ(parse_variant("oe"), Variant::output_error);
    EXPECT_EQ(parse_variant("output_error"), Variant::output_error);
    EXPECT_EQ(parse_variant("standard"), Variant::standard);
    EXPECT_STREQ(to_string(Variant::output_error), "oe");
    EXPECT_THROW(parse_variant("bogus"), std::invalid_argument);
}

TEST(EdgeStructured, StacksPerEdgeBlocks) {
    EdgeStructured e;
    e.measurement = Matrix::Constant(2, 1, 1.0);
    e.per_edge = Matrix::Constant(3, 1, 2.0);
    const Matrix rows = e.stacked_rows(2, 8);
    ASSERT_EQ(rows.rows(), 8);
    EXPECT_EQ(rows(1, 0), 1.0);
    EXPECT_EQ(rows(7, 0), 2.0);
    EXPECT_THROW(e.stacked_rows(2, 9), std::invalid_argument);
}
