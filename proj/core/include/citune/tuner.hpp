#pragma once

#include "citune/analysis.hpp"
#include "citune/estimator.hpp"
#include "citune/linalg.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace citune {

struct LmiScalars {
    double gamma = 1.0;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double c1 = 1.0;
    double c2 = 1.0;
    double alpha = 1.0;
};

/// Excitation constants entering the LMI.
struct LmiConstants {
    double iota3_lower = 0.0;
    double iota3_upper = 0.0;
    double r4 = 0.0;
    double window = 0.0;
};

/// One instance of the L2-gain LMI for a fixed active edge count.
/// `q` is p × nN for the standard variant and p × (nN_y + N n_e) for the
/// output-error variant.
struct LmiInstance {
    LmiScalars scalars;
    LmiConstants constants;
    Matrix delta1_bar;  ///< nN × r
    Matrix delta2_bar;  ///< (nN_y + N n_e) × r
    Matrix q;
    Matrix w;           ///< p × r
    int agents = 0;
    Eigen::Index parameters = 0;
    Eigen::Index outputs = 0;
    int edges = 0;

    Eigen::Index state_size() const { return agents * parameters; }
    Eigen::Index output_rows() const { return agents * outputs + parameters * edges; }
    Eigen::Index block_size() const { return output_rows() + 2 * state_size() + w.rows() + w.cols(); }

    /// Dimensions, positivity of constants and WᵀW = I, QᵀW = 0 (or the
    /// output-error counterparts). Throws std::invalid_argument.
    void check(Variant variant) const;
};

/// Builds LMI instances for every distinct edge count of the network's graph.
std::vector<LmiInstance> make_instances(const Network& net, const DisturbanceSpec& dist, const LmiConstants& constants,
                                        const LmiScalars& scalars);

/// Assembled symmetric matrix [[Φ11, Φ12], [Φ12ᵀ, −γ2 I]]; row blocks are
/// ordered (output error Λ̄x̃, x̃, z, δ, x̃).
Matrix build_phi_blocks(const LmiInstance& inst, Variant variant);

/// [[c2 ι̲3 / 2 · I, −Qᵀ], [−Q, I_p]], required to be positive definite for the
/// standard variant.
Matrix c2_condition_matrix(const LmiInstance& inst);

enum class FeasibilityFailure { none, gamma_order, c2_condition, block };

struct FeasibilityResult {
    bool feasible = false;
    double residual = 0.0;  ///< λ_max of the assembled block
    FeasibilityFailure failure = FeasibilityFailure::none;
    EigenPair witness;      ///< offending eigenpair when infeasible
    std::string reason;
};

FeasibilityResult feasibility_oracle(const LmiInstance& inst, Variant variant, double eps_feas = 1e-8);

/// Worst case over several instances (one per edge count).
FeasibilityResult feasibility_oracle(std::span<const LmiInstance> insts, Variant variant, double eps_feas = 1e-8);

struct SdpOptions {
    double eps_feas = 1e-8;
    double c1_max = 1e4;
    double gamma1_max = 1e4;
    double gamma2_max = 1e4;
    double box_floor = 1e-9;            ///< strictly positive lower edge of the search box
    double relative_tolerance = 1e-4;   ///< bisection stops when (hi − lo) < tol·hi
    double gamma_start = 1.0;           ///< first upper candidate, doubled until feasible
    double gamma_max = 1e12;
    int max_cuts = 4000;                ///< ellipsoid iterations per feasibility problem
};

struct TuningCertificate {
    LmiScalars scalars;
    LmiConstants constants;
    Variant variant = Variant::output_error;
    double residual = 0.0;
    double sqrt_gamma = 0.0;
    Matrix gamma_bar;
};

/// Scalars (c1, γ1, γ2) making all instances feasible at level γ, found by
/// the ellipsoid method with eigenvector subgradients; nullopt when the
/// search box is proven (or, at the iteration cap, assumed) infeasible.
struct CutResult {
    std::optional<LmiScalars> point;
    double best_residual = 0.0;
    int cuts = 0;
};
CutResult find_feasible_scalars(std::span<const LmiInstance> insts, Variant variant, double gamma,
                                const SdpOptions& options = {});

/// Minimises γ at fixed (α, c2) over (c1, γ1, γ2, γ). The scalars of the
/// template instances other than α and c2 are ignored. Γ̄ is left empty;
/// see select_gamma_bar. Throws DomainError(infeasible) when no feasible
/// point exists below gamma_max.
TuningCertificate solve_sdp(std::span<const LmiInstance> templates, Variant variant, const SdpOptions& options = {});

/// Smallest c2 on a log grid with c2 ι̲3 / 2 · I − QᵀQ > 0 (standard variant).
double select_c2(const LmiInstance& inst, double lo = 1e-6, double hi = 1e8, int per_decade = 20);

enum class GainPolicy { conservative, midpoint, upper };

GainPolicy parse_gain_policy(const std::string& name);

/// Γ̄ = g·I_{nN} with √γ2 ≤ g ≤ √γ1 chosen by the policy.
Matrix select_gamma_bar(double gamma1, double gamma2, GainPolicy policy, Eigen::Index size);

/// √γ2·I ≤ Γ̄ ≤ √γ1·I eigenvalue-wise (relative slack 1e-12).
bool gamma_bar_admissible(const Matrix& gamma_bar, double gamma1, double gamma2);

/// Replays the certified scalars with relaxed excitation constants. Rejects
/// (std::invalid_argument) constants that are not ordered as
/// ῑ3* ≥ ῑ3 ≥ ι̲3 ≥ ι̲3* > 0, r4* ≥ r4 > 0, T* ≥ T > 0.
FeasibilityResult proposition1_check(const TuningCertificate& cert, std::span<const LmiInstance> templates,
                                     const LmiConstants& relaxed, double eps_feas = 1e-8);

struct AlphaSample {
    double alpha = 0.0;
    double iota3_lower = 0.0;
    double iota3_upper = 0.0;
    double ratio() const { return iota3_lower / iota3_upper; }
};

struct AlphaSearchOptions {
    double alpha_min = 1e-2;
    double alpha_max = 10.0;
    int scan_points = 9;          ///< log-spaced bracketing scan before golden section
    double tolerance = 1e-3;      ///< golden section stops when the bracket is below tol·α
    int max_iterations = 40;
    int starts = 1000;
    EmpiricalOptions empirical;
};

struct AlphaSearchResult {
    double alpha = 0.0;
    double ratio = 0.0;
    std::vector<AlphaSample> samples;  ///< every evaluated candidate, in order
};

/// Maximises ι̲3(α)/ῑ3(α) over [alpha_min, alpha_max], both from
/// empirical_iota3 over the gain range. A log-spaced scan brackets the
/// maximiser, then golden-section search refines it.
AlphaSearchResult alpha_search(const Network& net, const GainRange& range, double window,
                               const AlphaSearchOptions& options = {});

}  // namespace citune

namespace citune {

struct TuneOptions {
    GainRange range;                    ///< admissible gains used for the ι3 estimates
    double window = 0.01;               ///< T
    std::optional<double> alpha;        ///< skip the α search when set
    std::optional<double> c2;           ///< default: 1 (output error) or select_c2 (standard)
    GainPolicy policy = GainPolicy::conservative;
    AlphaSearchOptions alpha_search;
    SdpOptions sdp;
    double r2_step = 5e-4;              ///< grid for sup ‖C_iᵀC_i‖
};

struct TuneResult {
    AlphaSearchResult alpha;
    EmpiricalIota3 iota3;
    double r2 = 0.0;
    double r3 = 0.0;
    TuningCertificate certificate;
};

/// Two-step tuning: α from the ι3-ratio search, then Γ̄ from the L2-gain SDP.
TuneResult tune_gains(const Network& net, const DisturbanceSpec& dist, const TuneOptions& options);

}  // namespace citune
