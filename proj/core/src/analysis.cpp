#include "citune/analysis.hpp"

#include "citune/errors.hpp"
#include "citune/parallel.hpp"
#include "citune/quadrature.hpp"
#include "citune/rk4.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace citune {

namespace {

std::vector<StepSegment> window_segments(const Network& net, double t0, double t1, double h, bool even) {
    const auto bps = net.graph().breakpoints();
    return aligned_segments(t0, t1, h, bps, [&](double t) { return net.graph().interval_index(t); }, even);
}

void require_finite(const Matrix& m, const char* what, double t) {
    if (!m.allFinite()) {
        std::ostringstream os;
        os << what << ": non-finite entries at t = " << t;
        throw DomainError(error_kind::non_finite, os.str());
    }
}

struct WindowIntegrals {
    Matrix gramian;   // ∫ ΦᵀSΦ ds
    Matrix weighted;  // ∫ (s − t + T) ΦᵀSΦ ds
};

WindowIntegrals transition_integrals(const Network& net, const EstimatorConfig& config, double t, double window,
                                     double step) {
    if (!(window > 0.0) || t < window) throw std::invalid_argument("window must satisfy 0 < T <= t");
    const Eigen::Index nn = net.state_size();
    const double t0 = t - window;
    const auto segments = window_segments(net, t0, t, step, true);

    WindowIntegrals out{Matrix::Zero(nn, nn), Matrix::Zero(nn, nn)};
    Matrix phi = Matrix::Identity(nn, nn);
    Matrix s_mat;
    // Walk the window backwards from s = t so that Φ(s, t) starts at I.
    for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
        const StepSegment& seg = *it;
        const auto w = simpson_weights(seg.steps, seg.step());
        auto f = [&](double s, const Matrix& p) -> Matrix {
            Matrix local;
            net.information(s, seg.tag, config.alpha, local);
            return -(config.gamma_bar * (local * p));
        };
        for (int k = seg.steps; k >= 0; --k) {
            const double s = seg.node(k);
            net.information(s, seg.tag, config.alpha, s_mat);
            const Matrix f_val = phi.transpose() * s_mat * phi;
            const double wk = w[static_cast<std::size_t>(k)];
            out.gramian += wk * f_val;
            out.weighted += (wk * (s - t0)) * f_val;
            if (k > 0) {
                phi = rk4_step(f, s, phi, -seg.step());
                require_finite(phi, "transition matrix", seg.node(k - 1));
            }
        }
    }
    out.gramian = symmetrize(out.gramian);
    out.weighted = symmetrize(out.weighted);
    return out;
}

}  // namespace

GramianResult gramian_oi(const Network& net, double alpha, double t, double window, double quad_step) {
    if (!(window > 0.0) || t < window) throw std::invalid_argument("gramian_oi: need 0 < T <= t");
    GramianResult out;
    out.t_begin = t - window;
    out.t_end = t;
    out.method = GramianMethod::quadrature;
    out.alpha = alpha;
    out.m = Matrix::Zero(net.state_size(), net.state_size());
    Matrix s_mat;
    for (const auto& seg : window_segments(net, t - window, t, quad_step, true)) {
        const auto w = simpson_weights(seg.steps, seg.step());
        for (int k = 0; k <= seg.steps; ++k) {
            net.information(seg.node(k), seg.tag, alpha, s_mat);
            out.m += w[static_cast<std::size_t>(k)] * s_mat;
        }
    }
    out.m = symmetrize(out.m);
    return out;
}

GramianResult gramian_ode(const Network& net, const EstimatorConfig& config, double t0, double window) {
    if (!(window > 0.0) || t0 < 0.0) throw std::invalid_argument("gramian_ode: need T > 0 and t0 >= 0");
    const Eigen::Index nn = net.state_size();
    if (config.gamma_bar.rows() != nn || config.gamma_bar.cols() != nn)
        throw std::invalid_argument("gramian_ode: Gamma_bar has wrong size");
    GramianResult out;
    out.t_begin = t0;
    out.t_end = t0 + window;
    out.method = GramianMethod::ode;
    out.gamma_bar = config.gamma_bar;
    out.alpha = config.alpha;

    Matrix m = Matrix::Zero(nn, nn);
    for (const auto& seg : window_segments(net, t0, t0 + window, config.step, false)) {
        auto f = [&](double s, const Matrix& x) -> Matrix {
            Matrix s_mat;
            net.information(s, seg.tag, config.alpha, s_mat);
            const Matrix sg = s_mat * config.gamma_bar;
            Matrix dx = sg * x;
            dx += dx.transpose().eval();  // MΓS = (SΓM)ᵀ for symmetric M
            return dx + s_mat;
        };
        for (int k = 0; k < seg.steps; ++k) {
            m = rk4_step(f, seg.node(k), m, seg.step());
            require_finite(m, "Gramian ODE", seg.node(k + 1));
        }
    }
    out.m = symmetrize(m);
    return out;
}

GramianResult gramian_transition(const Network& net, const EstimatorConfig& config, double t, double window,
                                 double step) {
    GramianResult out;
    out.t_begin = t - window;
    out.t_end = t;
    out.method = GramianMethod::transition;
    out.gamma_bar = config.gamma_bar;
    out.alpha = config.alpha;
    out.m = transition_integrals(net, config, t, window, step).gramian;
    return out;
}

double lemma1_objective(double s, const ExcitationReport& report, const SpectralBounds& spectral, double alpha,
                        int agents) {
    const double consensus = alpha * spectral.lambda_lower * (1.0 - s);
    const double excitation = report.iota1_lower / agents * s -
                              2.0 * report.r2 * report.window * std::sqrt(std::max(0.0, s * (1.0 - s)));
    return std::max(consensus, excitation);
}

Iota2Bounds lemma1_bounds(const ExcitationReport& report, const SpectralBounds& spectral, double alpha, int agents,
                          const Lemma1Options& options) {
    if (!(alpha > 0.0)) throw std::invalid_argument("lemma1_bounds: alpha must be positive");
    if (agents < 1) throw std::invalid_argument("lemma1_bounds: need at least one agent");
    if (options.grid_points < 3) throw std::invalid_argument("lemma1_bounds: grid too coarse");
    if (std::abs(report.window - spectral.window) > 1e-12 * std::max(1.0, report.window))
        throw std::invalid_argument("lemma1_bounds: excitation and connectivity windows differ");

    Iota2Bounds out;
    out.upper = report.window * r4_constant(report, alpha, spectral.r3);

    if (agents == 1) {
        // No disagreement subspace: only the excitation branch at ‖a‖² = 1 remains.
        out.lower = report.iota1_lower;
    } else {
        auto f = [&](double s) { return lemma1_objective(s, report, spectral, alpha, agents); };
        double lo = 0.0, hi = 1.0;
        double best = std::numeric_limits<double>::infinity();
        double best_s = 0.0;
        for (int round = 0; round <= options.max_refinements; ++round) {
            const int m = options.grid_points;
            const double previous = best;
            for (int k = 0; k <= m; ++k) {
                const double s = lo + (hi - lo) * k / m;
                const double v = f(s);
                if (v < best) {
                    best = v;
                    best_s = s;
                }
            }
            if (round > 0 && previous - best < options.refine_tolerance) break;
            // Zoom onto the two grid cells around the current minimiser.
            const double cell = (hi - lo) / m;
            lo = std::max(0.0, best_s - cell);
            hi = std::min(1.0, best_s + cell);
        }
        out.lower = best;
    }

    if (!(out.lower > 0.0)) {
        std::ostringstream os;
        os << "output-injection lower bound not positive for these constants (value " << out.lower << ", iota1 = "
           << report.iota1_lower << ", lambda = " << spectral.lambda_lower << ")";
        throw DomainError(error_kind::lemma1_nonpositive, os.str());
    }
    return out;
}

Iota3Bounds lemma2_bounds(double iota2_lower, double iota2_upper, double r1) {
    if (!(iota2_lower > 0.0) || !(iota2_upper >= iota2_lower) || !(r1 > 0.0))
        throw std::invalid_argument("lemma2_bounds: need 0 < iota2_lower <= iota2_upper and r1 > 0");
    Iota3Bounds out;
    const double ri = r1 * iota2_upper;
    out.phi1 = 0.5 * ri * ri;
    out.phi2 = 0.25 * std::expm1(2.0 * ri) - 0.5 * ri;
    const double gap = iota2_upper - iota2_lower;
    out.upper = std::pow(std::sqrt(gap + out.phi2 * iota2_lower) + std::sqrt(iota2_upper), 2);
    // the expression above can undershoot when iota2_lower << iota2_upper; Gronwall on
    // (Phi - I)w gives int_0^{iota2_upper} (e^{r1 s} - 1)^2 ds for the perturbation energy
    const double growth = ri < 1e-3 ? iota2_upper * ri * ri * (1.0 / 3.0 + ri / 4.0)
                                    : std::expm1(2.0 * ri) / (2.0 * r1) - 2.0 * std::expm1(ri) / r1 + iota2_upper;
    out.upper = std::max(out.upper, std::pow(std::sqrt(iota2_upper) + std::sqrt(std::max(growth, 0.0)), 2));
    if (std::abs(out.phi1 - 1.0) < 1e-9) {
        // limit of the general branch as phi1 -> 1
        out.lower = iota2_lower * iota2_lower / (4.0 * iota2_upper);
    } else {
        const double num = std::sqrt(gap + out.phi1 * iota2_lower) - std::sqrt(iota2_upper);
        out.lower = std::pow(num / (out.phi1 - 1.0), 2);
    }
    return out;
}

void fill_kappa(BoundSet& b, const Matrix& gamma_bar) {
    const Vector ev = sym_eigenvalues(gamma_bar);
    if (!(ev(0) > 0.0)) throw std::invalid_argument("fill_kappa: Gamma_bar must be positive definite");
    // Eigenvalues of Γ̄⁻¹ are the reciprocals.
    b.kappa1 = 0.5 * b.window / ev(0) + b.window * b.iota3_upper;
    b.kappa2 = 0.5 * b.window / ev(ev.size() - 1);
}

BoundSet analytic_bounds(const ExcitationReport& report, const SpectralBounds& spectral,
                         const EstimatorConfig& config, int agents, const Lemma1Options& options) {
    BoundSet b;
    b.window = report.window;
    const Iota2Bounds i2 = lemma1_bounds(report, spectral, config.alpha, agents, options);
    b.iota2_lower = i2.lower;
    b.iota2_upper = i2.upper;
    const Iota3Bounds i3 = lemma2_bounds(i2.lower, i2.upper, config.r1());
    b.iota3_lower = i3.lower;
    b.iota3_upper = i3.upper;
    b.phi1 = i3.phi1;
    b.phi2 = i3.phi2;
    fill_kappa(b, config.gamma_bar);
    return b;
}

BoundSet with_iota3(BoundSet b, double lower, double upper, const Matrix& gamma_bar) {
    if (!(lower > 0.0) || !(upper >= lower)) throw std::invalid_argument("with_iota3: need 0 < lower <= upper");
    b.iota3_lower = lower;
    b.iota3_upper = upper;
    fill_kappa(b, gamma_bar);
    return b;
}

EmpiricalIota3 empirical_iota3(const Network& net, const GainRange& range, double alpha, double window, int starts,
                               const EmpiricalOptions& options) {
    if (starts < 1) throw std::invalid_argument("empirical_iota3: need at least one start");
    if (!(alpha > 0.0)) throw std::invalid_argument("empirical_iota3: alpha must be positive");
    const double last = options.t_last < 0.0 ? options.horizon - window : options.t_last;
    if (last < options.t_first) throw std::invalid_argument("empirical_iota3: empty start range");
    const bool same = range.low.rows() == range.high.rows() && range.low.cols() == range.high.cols() &&
                      (range.low - range.high).cwiseAbs().maxCoeff() == 0.0;

    const auto count = static_cast<std::size_t>(starts);
    std::vector<double> lo(count), hi(count), t0s(count);
    parallel_for(count, [&](std::size_t k) {
        const double t0 = count == 1 ? options.t_first
                                     : options.t_first + (last - options.t_first) * static_cast<double>(k) / (count - 1);
        t0s[k] = t0;
        EstimatorConfig cfg{range.low, alpha, options.step, window};
        const Vector ev_low = sym_eigenvalues(gramian_ode(net, cfg, t0, window).m);
        Vector ev_high = ev_low;
        if (!same) {
            cfg.gamma_bar = range.high;
            ev_high = sym_eigenvalues(gramian_ode(net, cfg, t0, window).m);
        }
        lo[k] = ev_low(0);
        hi[k] = ev_high(ev_high.size() - 1);
        const double scale = std::max(1.0, hi[k]);
        if (ev_low(0) < -options.psd_tolerance * scale || ev_high(0) < -options.psd_tolerance * scale) {
            std::ostringstream os;
            os << "Gramian on window [" << t0 << ", " << t0 + window << "] is not positive semidefinite (min eigenvalue "
               << std::min(ev_low(0), ev_high(0)) << ")";
            throw DomainError(error_kind::non_psd, os.str());
        }
    });
    EmpiricalIota3 out;
    const auto worst = static_cast<std::size_t>(std::min_element(lo.begin(), lo.end()) - lo.begin());
    out.lower = lo[worst];
    out.worst_start = t0s[worst];
    out.upper = *std::max_element(hi.begin(), hi.end());
    return out;
}

LyapunovValue lyapunov_value(double t, const Vector& x_tilde, const Network& net, const EstimatorConfig& config,
                             double window, double step, const BoundSet* bounds) {
    if (x_tilde.size() != net.state_size()) throw std::invalid_argument("lyapunov_value: state has wrong length");
    const WindowIntegrals w = transition_integrals(net, config, t, window, step);
    LyapunovValue out;
    out.p = symmetrize(0.5 * window * config.gamma_bar.inverse() + w.weighted);
    out.gramian = w.gramian;
    out.p_spectrum = sym_eigenvalues(out.p);
    out.v = x_tilde.dot(out.p * x_tilde);
    if (bounds) {
        const double nx = x_tilde.squaredNorm();
        const double tol = 1e-8 * std::max(1.0, bounds->kappa1 * nx);
        out.within_bounds = out.v >= bounds->kappa2 * nx - tol && out.v <= bounds->kappa1 * nx + tol;
    }
    return out;
}

double convergence_bound(const BoundSet& b, double x0_norm, double t, double t0) {
    if (t < t0) throw std::invalid_argument("convergence_bound: need t >= t0");
    return std::sqrt(b.kappa1 / b.kappa2) * x0_norm * std::exp(-b.iota3_lower * (t - t0) / (2.0 * b.kappa1));
}

double iss_gain_bound(const BoundSet& b) {
    if (!(b.iota3_lower > 0.0) || !(b.kappa2 > 0.0)) throw std::invalid_argument("iss_gain_bound: invalid bound set");
    return 2.0 * b.kappa1 / b.iota3_lower * std::sqrt(b.kappa1 / b.kappa2);
}

}  // namespace citune
