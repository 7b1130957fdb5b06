#include "citune/bench.hpp"
#include "citune/errors.hpp"
#include "citune/tuner.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace citune;

namespace {

// n = 2 agents, N = 2, N_y = 1, one edge: m = 4 output rows, nN = 4, p = 3, r = 2.
LmiInstance small_instance(oracle::Rng& rng, Variant variant, double projection_scale = 1.0) {
    LmiInstance inst;
    inst.agents = 2;
    inst.parameters = 2;
    inst.outputs = 1;
    inst.edges = 1;
    inst.constants = {0.05, 0.5, 3.0, 0.1};
    inst.scalars = {50.0, 2.0, 1.0, 5.0, 1.0, 1.0};
    inst.delta1_bar = projection_scale * rng.matrix(4, 2);
    inst.delta2_bar = projection_scale * rng.matrix(4, 2);
    inst.w = Matrix::Zero(3, 2);
    inst.w.bottomRows(2).setIdentity();
    inst.q = Matrix::Zero(3, 4);
    inst.q.row(0) = rng.vector(4).transpose();
    if (variant == Variant::standard) inst.scalars.c2 = select_c2(inst);
    return inst;
}

LmiInstance zero_projection_instance(oracle::Rng& rng, Variant variant) { return small_instance(rng, variant, 0.0); }

}  // namespace

TEST(Instance, ChecksStructure) {
    oracle::Rng rng(70);
    LmiInstance inst = small_instance(rng, Variant::output_error);
    EXPECT_NO_THROW(inst.check(Variant::output_error));
    EXPECT_NO_THROW(inst.check(Variant::standard));  // Q is 3 × 4 in both layouts here
    LmiInstance bad = inst;
    bad.w(1, 0) = 0.5;
    EXPECT_THROW(bad.check(Variant::output_error), std::invalid_argument);
    bad = inst;
    bad.q(1, 0) = 1.0;  // QᵀW ≠ 0
    EXPECT_THROW(bad.check(Variant::output_error), std::invalid_argument);
    bad = inst;
    bad.scalars.c1 = 0.0;
    EXPECT_THROW(bad.check(Variant::output_error), std::invalid_argument);
    bad = inst;
    bad.delta2_bar = Matrix::Zero(5, 2);
    EXPECT_THROW(bad.check(Variant::output_error), std::invalid_argument);
}

TEST(Phi, ZeroProjections) {
    oracle::Rng rng(71);
    const LmiInstance inst = zero_projection_instance(rng, Variant::output_error);
    const Matrix phi = build_phi_blocks(inst, Variant::output_error);
    const Eigen::Index o4 = 4 + 4 + 3, r = 2;
    EXPECT_EQ(phi.block(o4, o4, r, r), -inst.scalars.gamma * Matrix::Identity(r, r));
    EXPECT_EQ(phi.block(o4, o4 + r, r, 4).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Phi, SymmetricByConstruction) {
    oracle::Rng rng(72);
    for (Variant v : {Variant::standard, Variant::output_error}) {
        const Matrix phi = build_phi_blocks(small_instance(rng, v), v);
        EXPECT_EQ(phi, phi.transpose());
    }
}

TEST(Phi, AffineInScalars) {
    oracle::Rng rng(73);
    for (Variant v : {Variant::standard, Variant::output_error}) {
        LmiInstance a = small_instance(rng, v), b = a;
        b.scalars = {rng.uniform(1, 100), rng.uniform(1, 5), rng.uniform(0.1, 1), rng.uniform(1, 10), a.scalars.c2,
                     a.scalars.alpha};
        const double w = 0.3;
        LmiInstance mix = a;
        mix.scalars.gamma = w * a.scalars.gamma + (1 - w) * b.scalars.gamma;
        mix.scalars.gamma1 = w * a.scalars.gamma1 + (1 - w) * b.scalars.gamma1;
        mix.scalars.gamma2 = w * a.scalars.gamma2 + (1 - w) * b.scalars.gamma2;
        mix.scalars.c1 = w * a.scalars.c1 + (1 - w) * b.scalars.c1;
        const Matrix combo = w * build_phi_blocks(a, v) + (1 - w) * build_phi_blocks(b, v);
        EXPECT_LE((build_phi_blocks(mix, v) - combo).cwiseAbs().maxCoeff(), 1e-11 * combo.cwiseAbs().maxCoeff());
    }
}

TEST(Phi, BenchmarkDimensions) {
    const Network net = benchmark_network(MassSpringParams{}, GraphSchedule::ring(6), 1.0, 1e-3);
    const auto insts = make_instances(net, scenario_disturbance(scenario(5)), {1e-4, 0.3, 16.0, 0.01}, {});
    ASSERT_EQ(insts.size(), 1u);
    EXPECT_EQ(insts[0].edges, 6);
    EXPECT_EQ(insts[0].block_size(), 24 + 18 + 5 + 3 + 18);
    EXPECT_EQ(build_phi_blocks(insts[0], Variant::output_error).rows(), 68);
}

TEST(Oracle, GammaOrder) {
    oracle::Rng rng(74);
    LmiInstance inst = small_instance(rng, Variant::output_error);
    inst.scalars.gamma1 = 0.5;
    inst.scalars.gamma2 = 1.0;
    const auto r = feasibility_oracle(inst, Variant::output_error);
    EXPECT_FALSE(r.feasible);
    EXPECT_EQ(r.failure, FeasibilityFailure::gamma_order);
}

TEST(Oracle, PositiveLeadingDiagonal) {
    oracle::Rng rng(75);
    LmiInstance inst = small_instance(rng, Variant::output_error);
    inst.scalars.gamma = 1e4;  // keep the disturbance block negative
    inst.scalars.c1 = 0.5 * inst.scalars.c2 * inst.constants.window;
    const auto r = feasibility_oracle(inst, Variant::output_error);
    EXPECT_FALSE(r.feasible);
    EXPECT_EQ(r.failure, FeasibilityFailure::block);
    EXPECT_GT(r.residual, 0.0);
    // the witness lives mostly in the output-error rows
    EXPECT_GT(r.witness.vector.head(4).squaredNorm(), 0.5);
}

TEST(Oracle, StandardVariantNeedsC2) {
    oracle::Rng rng(76);
    LmiInstance inst = small_instance(rng, Variant::standard);
    inst.q.row(0) *= 100.0;
    inst.scalars.c2 = 1e-6;
    const auto r = feasibility_oracle(inst, Variant::standard);
    EXPECT_EQ(r.failure, FeasibilityFailure::c2_condition);
    const double c2 = select_c2(inst);
    inst.scalars.c2 = c2;
    EXPECT_GT(lambda_min(c2_condition_matrix(inst)), 0.0);
    inst.scalars.c2 = c2 / std::pow(10.0, 1.0 / 20);
    EXPECT_LE(lambda_min(c2_condition_matrix(inst)), 0.0);
}

TEST(Oracle, RejectsNonPositiveTolerance) {
    oracle::Rng rng(77);
    EXPECT_THROW(feasibility_oracle(small_instance(rng, Variant::output_error), Variant::output_error, 0.0),
                 std::invalid_argument);
}

TEST(Sdp, FeedthroughFloor) {
    oracle::Rng rng(78);
    for (Variant v : {Variant::standard, Variant::output_error}) {
        const LmiInstance inst = zero_projection_instance(rng, v);
        const std::vector<LmiInstance> insts{inst};
        const TuningCertificate cert = solve_sdp(insts, v);
        EXPECT_GE(cert.scalars.gamma, 1.0);
        EXPECT_LE(cert.scalars.gamma, 1.01);
        // Schur complement of [[−I, W], [Wᵀ, −γI]]: feasible iff γ > λmax(WᵀW) = 1
        const Matrix wtw = inst.w.transpose() * inst.w;
        EXPECT_NEAR(oracle::jacobi_eigenvalues(wtw)(1), 1.0, 1e-15);
        LmiInstance below = inst;
        below.scalars = cert.scalars;
        below.scalars.gamma = 0.99;
        EXPECT_FALSE(feasibility_oracle(below, v).feasible);
    }
}

TEST(Sdp, CertificateReplays) {
    oracle::Rng rng(79);
    for (Variant v : {Variant::standard, Variant::output_error}) {
        const std::vector<LmiInstance> insts{small_instance(rng, v)};
        const TuningCertificate cert = solve_sdp(insts, v);
        LmiInstance replay = insts[0];
        replay.scalars = cert.scalars;
        const auto r = feasibility_oracle(replay, v);
        EXPECT_TRUE(r.feasible);
        EXPECT_LE(r.residual, -1e-8);
        EXPECT_NEAR(cert.residual, r.residual, 1e-12);
        EXPECT_DOUBLE_EQ(cert.sqrt_gamma, std::sqrt(cert.scalars.gamma));
        EXPECT_GE(cert.scalars.gamma1, cert.scalars.gamma2);
        // γ is minimal up to the bisection tolerance
        replay.scalars.gamma = cert.scalars.gamma * (1.0 - 1e-3);
        EXPECT_FALSE(find_feasible_scalars(std::vector<LmiInstance>{replay}, v, replay.scalars.gamma).point);
    }
}

TEST(Sdp, InfeasibleBoxIsReported) {
    oracle::Rng rng(80);
    const std::vector<LmiInstance> insts{small_instance(rng, Variant::output_error)};
    SdpOptions opt;
    opt.c1_max = 1e-6;  // c1 < c2·T forces a positive leading diagonal
    try {
        solve_sdp(insts, Variant::output_error, opt);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_EQ(e.kind(), error_kind::infeasible);
    }
}

TEST(GainSelection, Policies) {
    EXPECT_EQ(select_gamma_bar(4.0, 4.0, GainPolicy::conservative, 3), 2.0 * Matrix::Identity(3, 3));
    EXPECT_EQ(select_gamma_bar(4.0, 4.0, GainPolicy::upper, 3), 2.0 * Matrix::Identity(3, 3));
    EXPECT_DOUBLE_EQ(select_gamma_bar(9.0, 4.0, GainPolicy::midpoint, 2)(0, 0), 2.5);
    EXPECT_DOUBLE_EQ(select_gamma_bar(9.0, 4.0, GainPolicy::conservative, 2)(1, 1), 2.0);
    EXPECT_THROW(select_gamma_bar(1.0, 4.0, GainPolicy::conservative, 2), std::invalid_argument);
    EXPECT_TRUE(gamma_bar_admissible(2.5 * Matrix::Identity(2, 2), 9.0, 4.0));
    EXPECT_FALSE(gamma_bar_admissible(3.5 * Matrix::Identity(2, 2), 9.0, 4.0));
    EXPECT_EQ(parse_gain_policy("midpoint"), GainPolicy::midpoint);
    EXPECT_THROW(parse_gain_policy("greedy"), std::invalid_argument);
}

TEST(Relaxation, IdentityShrunkWindowAndOrdering) {
    oracle::Rng rng(81);
    const std::vector<LmiInstance> insts{small_instance(rng, Variant::output_error)};
    const TuningCertificate cert = solve_sdp(insts, Variant::output_error);
    EXPECT_TRUE(proposition1_check(cert, insts, cert.constants).feasible);
    LmiConstants shorter = cert.constants;
    shorter.window *= 0.9;
    EXPECT_TRUE(proposition1_check(cert, insts, shorter).feasible);
    LmiConstants bad = cert.constants;
    bad.iota3_lower *= 0.5;
    EXPECT_THROW(proposition1_check(cert, insts, bad), std::invalid_argument);
}

TEST(Relaxation, RandomAdmissibleRelaxationsStayFeasible) {
    oracle::Rng rng(82);
    for (Variant v : {Variant::standard, Variant::output_error}) {
        const std::vector<LmiInstance> insts{small_instance(rng, v)};
        const TuningCertificate cert = solve_sdp(insts, v);
        for (int k = 0; k < 50; ++k) {
            const LmiConstants& c = cert.constants;
            LmiConstants r;
            r.iota3_lower = rng.uniform(c.iota3_lower, c.iota3_upper);
            r.iota3_upper = rng.uniform(r.iota3_lower, c.iota3_upper);
            r.r4 = rng.uniform(1e-3, 1.0) * c.r4;
            r.window = rng.uniform(1e-3, 1.0) * c.window;
            EXPECT_TRUE(proposition1_check(cert, insts, r).feasible);
        }
    }
}

TEST(AlphaSearch, MaximiserOnSmallNetwork) {
    oracle::Rng rng(83);
    const Network net(rng.bank(3, 1, 2), GraphSchedule::ring(3));
    const Matrix i6 = Matrix::Identity(6, 6);
    AlphaSearchOptions opt;
    opt.starts = 10;
    opt.alpha_min = 0.05;
    opt.alpha_max = 5.0;
    opt.empirical = {0.0, -1.0, 1e-3, 3.0};
    const AlphaSearchResult res = alpha_search(net, {0.5 * i6, 2.0 * i6}, 0.2, opt);
    ASSERT_FALSE(res.samples.empty());
    for (const auto& s : res.samples) EXPECT_LE(s.ratio(), res.ratio);
    auto ratio_at = [&](double a) {
        const auto e = empirical_iota3(net, {0.5 * i6, 2.0 * i6}, a, 0.2, opt.starts, opt.empirical);
        return e.lower / e.upper;
    };
    EXPECT_GE(res.ratio, ratio_at(opt.alpha_min));
    EXPECT_GE(res.ratio, ratio_at(opt.alpha_max));
    opt.alpha_min = 0.0;
    EXPECT_THROW(alpha_search(net, {i6, i6}, 0.2, opt), std::invalid_argument);
}
