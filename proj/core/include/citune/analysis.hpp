#pragma once

#include "citune/estimator.hpp"
#include "citune/excitation.hpp"
#include "citune/graph.hpp"

#include <optional>

namespace citune {

enum class GramianMethod { quadrature, ode, transition };

struct GramianResult {
    Matrix m;
    double t_begin = 0.0;
    double t_end = 0.0;
    GramianMethod method = GramianMethod::quadrature;
    Matrix gamma_bar;  ///< empty for the output-injection Gramian
    double alpha = 0.0;
};

/// ∫_{t-T}^t Λ̄ᵀΛ̄ ds by composite Simpson (steps aligned to graph switches).
GramianResult gramian_oi(const Network& net, double alpha, double t, double window, double quad_step = 5e-4);

/// Ṁ = SΓ̄M + MΓ̄S + S with S = Λ̄ᵀΛ̄, M(t0) = 0, integrated by RK4 with
/// config.step over [t0, t0 + T]. The result is M(t0 + T, t0).
GramianResult gramian_ode(const Network& net, const EstimatorConfig& config, double t0, double window);

/// M(t, t−T) = ∫ Φ̄ᵀ(s,t) S(s) Φ̄(s,t) ds, with Φ̄(·,t) obtained by integrating
/// dΦ̄/ds = −Γ̄S(s)Φ̄ backwards from Φ̄(t,t) = I (RK4 + Simpson at `step`).
GramianResult gramian_transition(const Network& net, const EstimatorConfig& config, double t, double window,
                                 double step);

struct Iota2Bounds {
    double lower = 0.0;
    double upper = 0.0;
};

struct Lemma1Options {
    int grid_points = 10000;
    double refine_tolerance = 1e-8;
    int max_refinements = 60;
};

/// Bounds on the output-injection Gramian from the excitation and
/// connectivity constants (which must share the window T). Throws
/// DomainError(lemma1_nonpositive) when the lower bound is not positive.
Iota2Bounds lemma1_bounds(const ExcitationReport& report, const SpectralBounds& spectral, double alpha, int agents,
                          const Lemma1Options& options = {});

/// The min–max objective at s = ‖a‖², exposed for tests.
double lemma1_objective(double s, const ExcitationReport& report, const SpectralBounds& spectral, double alpha,
                        int agents);

struct Iota3Bounds {
    double lower = 0.0;
    double upper = 0.0;
    double phi1 = 0.0;
    double phi2 = 0.0;
};

/// Gramian bounds from the output-injection bounds and r1 = ‖Γ̄‖. At φ1 = 1
/// (within 1e-9) the continuous limit ι̲2²/(4ῑ2) of the general expression is used.
/// The upper value is never below (√ῑ2 + √F)², F = ∫₀^{ῑ2}(e^{r1 s} − 1)² ds, which
/// holds for any ι̲2; the φ2 expression alone can undershoot when ι̲2 ≪ ῑ2.
Iota3Bounds lemma2_bounds(double iota2_lower, double iota2_upper, double r1);

struct BoundSet {
    double window = 0.0;
    double iota2_lower = 0.0, iota2_upper = 0.0;
    double iota3_lower = 0.0, iota3_upper = 0.0;
    double phi1 = 0.0, phi2 = 0.0;
    double kappa1 = 0.0, kappa2 = 0.0;
};

/// κ1 = T/2 λmax(Γ̄⁻¹) + Tῑ3, κ2 = T/2 λmin(Γ̄⁻¹).
void fill_kappa(BoundSet& b, const Matrix& gamma_bar);

/// Full analytic chain: output-injection bounds, Gramian bounds and κ for the given gains.
BoundSet analytic_bounds(const ExcitationReport& report, const SpectralBounds& spectral,
                         const EstimatorConfig& config, int agents, const Lemma1Options& options = {});

/// Copy of `b` with ι̲3, ῑ3 replaced (e.g. by empirical values) and κ's recomputed.
BoundSet with_iota3(BoundSet b, double lower, double upper, const Matrix& gamma_bar);

struct GainRange {
    Matrix low;   ///< smallest admissible Γ̄
    Matrix high;  ///< largest admissible Γ̄
};

struct EmpiricalIota3 {
    double lower = 0.0;
    double upper = 0.0;
    double worst_start = 0.0;  ///< start time of the window attaining the lower value
};

struct EmpiricalOptions {
    double t_first = 0.0;   ///< first window start
    double t_last = -1.0;   ///< last window start; < 0 means horizon − T
    double step = 1e-3;     ///< RK4 step of the Gramian ODE
    double horizon = 50.0;
    double psd_tolerance = 1e-10;
};

/// Gramian ODE solved on `starts` uniformly spaced windows of length T.
/// ι̲3 is the smallest λ_min obtained with range.low, ῑ3 the largest λ_max
/// obtained with range.high.
EmpiricalIota3 empirical_iota3(const Network& net, const GainRange& range, double alpha, double window, int starts,
                               const EmpiricalOptions& options = {});

struct LyapunovValue {
    double v = 0.0;
    Vector p_spectrum;  ///< ascending eigenvalues of P(t)
    Matrix p;
    Matrix gramian;     ///< M(t, t−T); dV/dt = −x̃ᵀ M x̃
    std::optional<bool> within_bounds;  ///< set when a BoundSet was supplied
};

/// V(t, x̃) = x̃ᵀP(t)x̃ with P(t) = (T/2)Γ̄⁻¹ + ∫_{t−T}^t (s−t+T) Φ̄ᵀSΦ̄ ds.
LyapunovValue lyapunov_value(double t, const Vector& x_tilde, const Network& net, const EstimatorConfig& config,
                             double window, double step, const BoundSet* bounds = nullptr);

/// √(κ1/κ2)·‖x̃(t0)‖·exp(−ι̲3 (t − t0) / (2κ1)).
double convergence_bound(const BoundSet& b, double x0_norm, double t, double t0);

/// (2κ1/ι̲3)·√(κ1/κ2). Evaluated as stated for the limiting case of the
/// ISS argument (its proof needs a factor β < 1 that is dropped here).
double iss_gain_bound(const BoundSet& b);

}  // namespace citune
