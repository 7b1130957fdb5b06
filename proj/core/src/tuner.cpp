#include "citune/tuner.hpp"

#include "citune/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace citune {

namespace {

constexpr double kStructureTol = 1e-12;

Matrix assemble(const LmiInstance& inst, Variant variant, const LmiScalars& s) {
    const Eigen::Index m = inst.output_rows(), nn = inst.state_size(), p = inst.w.rows(), r = inst.w.cols();
    const Eigen::Index o2 = m, o3 = m + nn, o4 = m + nn + p, o5 = m + nn + p + r;
    const LmiConstants& k = inst.constants;
    const double lo = k.iota3_lower, hi = k.iota3_upper;

    Matrix phi = Matrix::Zero(o5 + nn, o5 + nn);
    phi.block(0, 0, m, m).diagonal().setConstant(-s.c1 + s.c2 * k.window);
    phi.block(o2, o2, nn, nn).diagonal().setConstant(-0.5 * s.c2 * lo);
    phi.block(o3, o3, p, p).diagonal().setConstant(-1.0);
    if (variant == Variant::standard) {
        phi.block(o3, o2, p, nn) = inst.q;
        phi.block(o2, o3, nn, p) = inst.q.transpose();
    } else {
        phi.block(o3, 0, p, m) = inst.q;
        phi.block(0, o3, m, p) = inst.q.transpose();
    }
    phi.block(o3, o4, p, r) = inst.w;
    phi.block(o4, o3, r, p) = inst.w.transpose();

    const double drift = 8.0 * s.c2 * hi * hi / lo;
    Matrix phi44 = drift * (inst.delta1_bar.transpose() * inst.delta1_bar) +
                   (s.c1 + drift * k.r4 * s.gamma1) * (inst.delta2_bar.transpose() * inst.delta2_bar);
    phi44.diagonal().array() -= s.gamma;
    phi.block(o4, o4, r, r) = phi44;

    const Matrix coupling = (-2.0 * s.c1 / std::sqrt(s.c2 * lo)) * inst.delta1_bar.transpose();
    phi.block(o4, o5, r, nn) = coupling;
    phi.block(o5, o4, nn, r) = coupling.transpose();
    phi.block(o5, o5, nn, nn).diagonal().setConstant(-s.gamma2);
    return phi;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument("LMI instance: " + msg);
}

LmiInstance with(const LmiInstance& inst, const LmiScalars& s) {
    LmiInstance out = inst;
    out.scalars = s;
    return out;
}

// Affine pieces of the block in (c1, γ1, γ2) at fixed (γ, c2).
struct AffineBlock {
    Matrix base;
    Matrix coeff[3];
};

AffineBlock affine_pieces(const LmiInstance& inst, Variant variant, double gamma) {
    LmiScalars s = inst.scalars;
    s.gamma = gamma;
    s.c1 = s.gamma1 = s.gamma2 = 0.0;
    AffineBlock a;
    a.base = assemble(inst, variant, s);
    for (int k = 0; k < 3; ++k) {
        LmiScalars e = s;
        (k == 0 ? e.c1 : k == 1 ? e.gamma1 : e.gamma2) = 1.0;
        a.coeff[k] = assemble(inst, variant, e) - a.base;
    }
    return a;
}

}  // namespace

void LmiInstance::check(Variant variant) const {
    const auto& s = scalars;
    require(s.gamma > 0 && s.gamma1 > 0 && s.gamma2 > 0 && s.c1 > 0 && s.c2 > 0 && s.alpha > 0,
            "all scalars must be positive");
    const auto& k = constants;
    require(k.iota3_lower > 0 && k.iota3_upper >= k.iota3_lower && k.r4 > 0 && k.window > 0,
            "excitation constants must satisfy 0 < iota3_lower <= iota3_upper, r4 > 0, T > 0");
    require(agents > 0 && parameters > 0 && outputs > 0 && edges >= 0, "dimensions must be positive");
    const Eigen::Index r = w.cols(), p = w.rows();
    require(p > 0 && r > 0, "W must be non-empty");
    require(delta1_bar.rows() == state_size() && delta1_bar.cols() == r, "Delta1_bar must be nN x r");
    require(delta2_bar.rows() == output_rows() && delta2_bar.cols() == r, "Delta2_bar must be (nN_y + N n_e) x r");
    const Eigen::Index q_cols = variant == Variant::standard ? state_size() : output_rows();
    require(q.rows() == p && q.cols() == q_cols,
            variant == Variant::standard ? "Q must be p x nN" : "Q_OE must be p x (nN_y + N n_e)");
    require((w.transpose() * w - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() <= kStructureTol,
            "W must satisfy W^T W = I");
    require((q.transpose() * w).cwiseAbs().maxCoeff() <= kStructureTol, "Q must satisfy Q^T W = 0");
}

std::vector<LmiInstance> make_instances(const Network& net, const DisturbanceSpec& dist, const LmiConstants& constants,
                                        const LmiScalars& scalars) {
    dist.check(net);
    std::set<int> counts;
    for (const auto& iv : net.graph().intervals()) counts.insert(static_cast<int>(iv.edges.size()));
    std::vector<LmiInstance> out;
    for (int edges : counts) {
        LmiInstance inst;
        inst.scalars = scalars;
        inst.constants = constants;
        inst.agents = net.agents();
        inst.parameters = net.parameters();
        inst.outputs = net.outputs();
        inst.edges = edges;
        inst.delta1_bar = dist.delta1_bar;
        inst.delta2_bar = dist.delta2_bar.stacked_rows(edges, inst.output_rows());
        inst.q = dist.variant == Variant::standard ? dist.q : dist.q_oe.stacked_cols(edges, inst.output_rows());
        inst.w = dist.w;
        out.push_back(std::move(inst));
    }
    return out;
}

Matrix build_phi_blocks(const LmiInstance& inst, Variant variant) {
    inst.check(variant);
    return assemble(inst, variant, inst.scalars);
}

Matrix c2_condition_matrix(const LmiInstance& inst) {
    const Eigen::Index nn = inst.state_size(), p = inst.q.rows();
    if (inst.q.cols() != nn) throw std::invalid_argument("c2 condition needs Q of size p x nN");
    Matrix m = Matrix::Zero(nn + p, nn + p);
    m.topLeftCorner(nn, nn).diagonal().setConstant(0.5 * inst.scalars.c2 * inst.constants.iota3_lower);
    m.topRightCorner(nn, p) = -inst.q.transpose();
    m.bottomLeftCorner(p, nn) = -inst.q;
    m.bottomRightCorner(p, p).setIdentity();
    return m;
}

FeasibilityResult feasibility_oracle(const LmiInstance& inst, Variant variant, double eps_feas) {
    if (!(eps_feas > 0.0)) throw std::invalid_argument("eps_feas must be positive");
    FeasibilityResult res;
    if (inst.scalars.gamma1 < inst.scalars.gamma2) {
        res.failure = FeasibilityFailure::gamma_order;
        res.residual = inst.scalars.gamma2 - inst.scalars.gamma1;
        res.reason = "gamma1 < gamma2";
        return res;
    }
    const Matrix phi = build_phi_blocks(inst, variant);
    if (variant == Variant::standard) {
        const EigenPair low = bottom_eigenpair(c2_condition_matrix(inst));
        if (!(low.value > 0.0)) {
            res.failure = FeasibilityFailure::c2_condition;
            res.residual = -low.value;
            res.witness = low;
            res.reason = "c2 too small: [[c2 iota3/2 I, -Q^T], [-Q, I]] is not positive definite";
            return res;
        }
    }
    res.witness = top_eigenpair(phi);
    res.residual = res.witness.value;
    res.feasible = res.residual <= -eps_feas;
    if (!res.feasible) {
        res.failure = FeasibilityFailure::block;
        std::ostringstream os;
        os << "LMI block has largest eigenvalue " << res.residual << " > -" << eps_feas;
        res.reason = os.str();
    }
    return res;
}

FeasibilityResult feasibility_oracle(std::span<const LmiInstance> insts, Variant variant, double eps_feas) {
    if (insts.empty()) throw std::invalid_argument("feasibility_oracle: no instances");
    FeasibilityResult worst;
    bool first = true;
    for (const auto& inst : insts) {
        FeasibilityResult r = feasibility_oracle(inst, variant, eps_feas);
        if (!r.feasible && r.failure != FeasibilityFailure::block) return r;
        if (first || r.residual > worst.residual) worst = std::move(r);
        first = false;
    }
    return worst;
}

CutResult find_feasible_scalars(std::span<const LmiInstance> insts, Variant variant, double gamma,
                                const SdpOptions& options) {
    if (insts.empty()) throw std::invalid_argument("find_feasible_scalars: no instances");
    constexpr int n = 3;
    std::vector<AffineBlock> pieces;
    for (const auto& inst : insts) pieces.push_back(affine_pieces(inst, variant, gamma));

    const Eigen::Vector3d lo = Eigen::Vector3d::Constant(options.box_floor);
    const Eigen::Vector3d hi(options.c1_max, options.gamma1_max, options.gamma2_max);
    Eigen::Vector3d c = 0.5 * (lo + hi);
    Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
    p.diagonal() = (0.5 * (hi - lo)).array().square() * n;  // ellipsoid enclosing the box

    CutResult out;
    out.best_residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < options.max_cuts; ++it) {
        out.cuts = it + 1;
        Eigen::Vector3d g = Eigen::Vector3d::Zero();
        double h = 0.0;
        int k_box = -1;
        for (int k = 0; k < n; ++k) {
            if (c(k) < lo(k)) { k_box = k; g(k) = -1.0; h = lo(k) - c(k); break; }
            if (c(k) > hi(k)) { k_box = k; g(k) = 1.0; h = c(k) - hi(k); break; }
        }
        if (k_box < 0 && c(1) < c(2)) {
            g << 0.0, -1.0, 1.0;
            h = c(2) - c(1);
        } else if (k_box < 0) {
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto& a : pieces) {
                Matrix blk = a.base + c(0) * a.coeff[0] + c(1) * a.coeff[1] + c(2) * a.coeff[2];
                const EigenPair top = top_eigenpair(blk);
                if (top.value > worst) {
                    worst = top.value;
                    for (int k = 0; k < n; ++k) g(k) = top.vector.dot(a.coeff[k] * top.vector);
                }
            }
            out.best_residual = std::min(out.best_residual, worst);
            h = worst + options.eps_feas;
            if (h <= 0.0) {
                LmiScalars s = insts.front().scalars;
                s.gamma = gamma;
                s.c1 = c(0);
                s.gamma1 = c(1);
                s.gamma2 = c(2);
                out.point = s;
                return out;
            }
        }
        const double gpg = g.dot(p * g);
        if (!(gpg > 0.0)) break;  // flat subgradient with positive value: infeasible
        const double root = std::sqrt(gpg);
        const double a = h / root;
        if (a >= 1.0) break;  // whole ellipsoid lies on the infeasible side
        const Eigen::Vector3d pg = p * g / root;
        c -= (1.0 + n * a) / (n + 1.0) * pg;
        p = (double(n * n) / (n * n - 1.0)) * (1.0 - a * a) *
            (p - (2.0 * (1.0 + n * a) / ((n + 1.0) * (1.0 + a))) * (pg * pg.transpose()));
        p = (0.5 * (p + p.transpose())).eval();
        if (!(p.trace() > 1e-30)) break;
    }
    return out;
}

TuningCertificate solve_sdp(std::span<const LmiInstance> templates, Variant variant, const SdpOptions& options) {
    if (templates.empty()) throw std::invalid_argument("solve_sdp: no instances");
    for (const auto& t : templates) t.check(variant);
    const double c2 = templates.front().scalars.c2;
    if (variant == Variant::standard) {
        if (!(lambda_min(c2_condition_matrix(templates.front())) > 0.0))
            throw DomainError(error_kind::infeasible, "c2 does not satisfy the standard-variant precondition");
    }

    double lo = 0.0, hi = options.gamma_start;
    std::optional<LmiScalars> best;
    double best_residual = std::numeric_limits<double>::infinity();
    while (true) {
        CutResult r = find_feasible_scalars(templates, variant, hi, options);
        best_residual = std::min(best_residual, r.best_residual);
        if (r.point) {
            best = r.point;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if (hi > options.gamma_max) {
            std::ostringstream os;
            os << "infeasible in search box up to gamma = " << options.gamma_max << " (best residual "
               << best_residual << ")";
            throw DomainError(error_kind::infeasible, os.str());
        }
    }
    while (hi - lo >= options.relative_tolerance * hi) {
        const double mid = 0.5 * (lo + hi);
        CutResult r = find_feasible_scalars(templates, variant, mid, options);
        if (r.point) {
            hi = mid;
            best = r.point;
        } else {
            lo = mid;
        }
    }

    TuningCertificate cert;
    cert.scalars = *best;
    cert.scalars.c2 = c2;
    cert.constants = templates.front().constants;
    cert.variant = variant;
    std::vector<LmiInstance> replay;
    for (const auto& t : templates) replay.push_back(with(t, cert.scalars));
    const FeasibilityResult check = feasibility_oracle(std::span<const LmiInstance>(replay), variant, options.eps_feas);
    if (!check.feasible) throw DomainError(error_kind::infeasible, "certificate failed replay: " + check.reason);
    cert.residual = check.residual;
    cert.sqrt_gamma = std::sqrt(cert.scalars.gamma);
    return cert;
}

double select_c2(const LmiInstance& inst, double lo, double hi, int per_decade) {
    if (!(lo > 0.0) || !(hi > lo) || per_decade < 1) throw std::invalid_argument("select_c2: bad grid");
    const int count = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
    LmiInstance probe = inst;
    for (int k = 0; k <= count; ++k) {
        probe.scalars.c2 = lo * std::pow(10.0, static_cast<double>(k) / per_decade);
        if (lambda_min(c2_condition_matrix(probe)) > 0.0) return probe.scalars.c2;
    }
    throw DomainError(error_kind::infeasible, "no c2 on the grid satisfies the standard-variant precondition");
}

GainPolicy parse_gain_policy(const std::string& name) {
    if (name == "conservative") return GainPolicy::conservative;
    if (name == "midpoint") return GainPolicy::midpoint;
    if (name == "upper") return GainPolicy::upper;
    throw std::invalid_argument("unknown gain policy '" + name + "'");
}

bool gamma_bar_admissible(const Matrix& gamma_bar, double gamma1, double gamma2) {
    const Vector ev = sym_eigenvalues(gamma_bar);
    const double lo = std::sqrt(gamma2), hi = std::sqrt(gamma1);
    return ev(0) >= lo * (1.0 - 1e-12) && ev(ev.size() - 1) <= hi * (1.0 + 1e-12);
}

Matrix select_gamma_bar(double gamma1, double gamma2, GainPolicy policy, Eigen::Index size) {
    if (!(gamma2 > 0.0) || gamma1 < gamma2) throw std::invalid_argument("select_gamma_bar: need gamma1 >= gamma2 > 0");
    double g = std::sqrt(gamma2);
    if (policy == GainPolicy::midpoint) g = 0.5 * (std::sqrt(gamma1) + std::sqrt(gamma2));
    if (policy == GainPolicy::upper) g = std::sqrt(gamma1);
    Matrix out = g * Matrix::Identity(size, size);
    if (!gamma_bar_admissible(out, gamma1, gamma2))
        throw std::invalid_argument("select_gamma_bar: policy produced gains outside the admissible interval");
    return out;
}

FeasibilityResult proposition1_check(const TuningCertificate& cert, std::span<const LmiInstance> templates,
                                     const LmiConstants& relaxed, double eps_feas) {
    const LmiConstants& c = cert.constants;
    const bool ordered = c.iota3_upper >= relaxed.iota3_upper && relaxed.iota3_upper >= relaxed.iota3_lower &&
                         relaxed.iota3_lower >= c.iota3_lower && c.iota3_lower > 0.0 && c.r4 >= relaxed.r4 &&
                         relaxed.r4 > 0.0 && c.window >= relaxed.window && relaxed.window > 0.0;
    if (!ordered)
        throw std::invalid_argument("relaxed constants must satisfy iota3_upper* >= iota3_upper >= iota3_lower >= "
                                    "iota3_lower* > 0, r4* >= r4 > 0, T* >= T > 0");
    std::vector<LmiInstance> insts;
    for (const auto& t : templates) {
        LmiInstance inst = with(t, cert.scalars);
        inst.constants = relaxed;
        insts.push_back(std::move(inst));
    }
    return feasibility_oracle(std::span<const LmiInstance>(insts), cert.variant, eps_feas);
}

AlphaSearchResult alpha_search(const Network& net, const GainRange& range, double window,
                               const AlphaSearchOptions& options) {
    if (!(options.alpha_min > 0.0)) throw std::invalid_argument("alpha must be positive (consensus weight)");
    if (!(options.alpha_max > options.alpha_min)) throw std::invalid_argument("alpha_search: empty interval");
    if (options.scan_points < 2) throw std::invalid_argument("alpha_search: need at least two scan points");

    AlphaSearchResult out;
    auto eval = [&](double alpha) {
        const EmpiricalIota3 e = empirical_iota3(net, range, alpha, window, options.starts, options.empirical);
        if (!(e.lower > 0.0) || !(e.upper > 0.0)) {
            std::ostringstream os;
            os << "excitation lost at alpha = " << alpha << ": iota3 estimates [" << e.lower << ", " << e.upper << "]";
            throw DomainError(error_kind::excitation_failure, os.str());
        }
        out.samples.push_back({alpha, e.lower, e.upper});
        return out.samples.back().ratio();
    };

    const int m = options.scan_points;
    std::vector<double> grid(static_cast<std::size_t>(m)), vals(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        grid[static_cast<std::size_t>(k)] =
            options.alpha_min * std::pow(options.alpha_max / options.alpha_min, static_cast<double>(k) / (m - 1));
        vals[static_cast<std::size_t>(k)] = eval(grid[static_cast<std::size_t>(k)]);
    }
    const auto kbest = static_cast<std::size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
    double a = grid[kbest == 0 ? 0 : kbest - 1];
    double b = grid[std::min(kbest + 1, grid.size() - 1)];

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = eval(x1), f2 = eval(x2);
    for (int it = 0; it < options.max_iterations && (b - a) > options.tolerance * std::max(x1, x2); ++it) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2);
        }
    }
    const auto best = std::max_element(out.samples.begin(), out.samples.end(),
                                       [](const AlphaSample& l, const AlphaSample& r) { return l.ratio() < r.ratio(); });
    out.alpha = best->alpha;
    out.ratio = best->ratio();
    return out;
}

TuneResult tune_gains(const Network& net, const DisturbanceSpec& dist, const TuneOptions& options) {
    TuneResult out;
    if (options.alpha) {
        if (!(*options.alpha > 0.0)) throw std::invalid_argument("alpha must be positive (consensus weight)");
        out.alpha.alpha = *options.alpha;
    } else {
        out.alpha = alpha_search(net, options.range, options.window, options.alpha_search);
    }
    const double alpha = out.alpha.alpha;
    out.iota3 = empirical_iota3(net, options.range, alpha, options.window, options.alpha_search.starts,
                                options.alpha_search.empirical);
    if (options.alpha) out.alpha.ratio = out.iota3.lower / out.iota3.upper;
    if (!(out.iota3.lower > 0.0))
        throw DomainError(error_kind::excitation_failure, "empirical Gramian lower bound is not positive");

    out.r2 = regressor_bound(net.bank(), 0.0, options.alpha_search.empirical.horizon, options.r2_step);
    for (std::size_t k = 0; k < net.graph().interval_count(); ++k)
        out.r3 = std::max(out.r3, lambda_max(net.graph().laplacian(k)));

    LmiConstants constants{out.iota3.lower, out.iota3.upper, out.r2 + alpha * out.r3, options.window};
    LmiScalars scalars;
    scalars.alpha = alpha;
    auto insts = make_instances(net, dist, constants, scalars);
    double c2 = 1.0;
    if (options.c2) {
        c2 = *options.c2;
    } else if (dist.variant == Variant::standard) {
        c2 = select_c2(insts.front());
    }
    for (auto& inst : insts) inst.scalars.c2 = c2;

    out.certificate = solve_sdp(std::span<const LmiInstance>(insts), dist.variant, options.sdp);
    out.certificate.gamma_bar = select_gamma_bar(out.certificate.scalars.gamma1, out.certificate.scalars.gamma2,
                                                 options.policy, net.state_size());
    return out;
}

}  // namespace citune
