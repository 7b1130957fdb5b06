#pragma once

#include "citune/excitation.hpp"
#include "citune/graph.hpp"
#include "citune/linalg.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace citune {

/// Gains of the consensus + innovations estimator and the integration grid.
struct EstimatorConfig {
    Matrix gamma_bar;      ///< block-diagonal SPD, nN × nN
    double alpha = 1.0;    ///< consensus weight
    double step = 1e-3;    ///< RK4 step h
    double horizon = 50.0;

    /// r1 = ‖Γ̄‖.
    double r1() const { return sym_norm(gamma_bar); }
};

/// Γ̄ = I_n ⊗ g.
Matrix uniform_gain(int agents, const Matrix& g);

/// Checks α > 0, h > 0, horizon ≥ h, Γ̄ block-diagonal with symmetric
/// positive definite N × N blocks. Throws std::invalid_argument naming the
/// offending block and Cholesky pivot.
void validate_config(const EstimatorConfig& config, int agents, Eigen::Index parameters);

/// A regressor bank together with the communication graph it runs on.
/// Stacked Laplacians L̄_k = L_k ⊗ I_N are cached per graph interval.
class Network {
public:
    Network(RegressorBank bank, GraphSchedule graph);

    const RegressorBank& bank() const { return bank_; }
    const GraphSchedule& graph() const { return graph_; }
    int agents() const { return bank_.agents(); }
    Eigen::Index parameters() const { return bank_.parameters(); }
    Eigen::Index outputs() const { return bank_.outputs(); }
    Eigen::Index state_size() const { return bank_.stacked_size(); }
    Eigen::Index measurement_rows() const { return agents() * outputs(); }

    const Matrix& stacked_laplacian(std::size_t interval) const { return stacked_laplacian_[interval]; }

    /// S(t) = Λ̄ᵀΛ̄ = C̄ᵀC̄ + α L̄, written into `out` (nN × nN) without
    /// assembling Λ̄; graph interval given explicitly so callers can pin it.
    void information(double t, std::size_t interval, double alpha, Matrix& out) const;
    Matrix information(double t, double alpha) const;

private:
    RegressorBank bank_;
    GraphSchedule graph_;
    std::vector<Matrix> stacked_laplacian_;
};

/// Λ̄(t) = [C̄(t); √α Dᵀ(t) ⊗ I_N].
struct OutputMap {
    Matrix lambda;
    Eigen::Index measurement_rows = 0;  ///< nN_y
    int edges = 0;                      ///< n_e(t)

    Eigen::Index consensus_rows() const { return lambda.rows() - measurement_rows; }
    auto measurement_block() const { return lambda.topRows(measurement_rows); }
    auto consensus_block() const { return lambda.bottomRows(consensus_rows()); }
};

OutputMap assemble_lambda(const Network& net, double alpha, double t);

/// Right-hand side of the local update laws in stacked form,
/// −αΓ̄L̄x̂ − Γ̄C̄ᵀ(C̄x̂ − ȳ₁); y1 stacks the agents' measurements (nN_y).
Vector ci_rhs(const Vector& x_hat, double t, const EstimatorConfig& config, const Network& net, const Vector& y1);

/// The same flow written as gradient descent on ½‖Λ̄x̂ − y‖², y = [ȳ₁; 0].
Vector ci_rhs_gradient(const Vector& x_hat, double t, const EstimatorConfig& config, const Network& net,
                       const Vector& y1);

/// Error dynamics under an additive disturbance: −Γ̄Λ̄ᵀΛ̄x̃ + δ_ISS.
Vector affine_disturbed_rhs(const Vector& x_tilde, double t, const EstimatorConfig& config, const Network& net,
                            const Vector& delta_iss);

struct SimulationOptions {
    int record_stride = 1;       ///< keep every k-th step (endpoints always kept)
    bool record_outputs = false; ///< also store ỹ = Λ̄x̃
};

struct NominalTrajectory {
    std::vector<double> t;
    std::vector<Vector> x_hat;
    std::vector<Vector> x_tilde;
    std::vector<Vector> y_tilde;  ///< empty unless requested
};

/// Integrates the estimator for constant true parameter θ with exact
/// measurements ȳ₁ = C̄(𝟙ₙ⊗θ). RK4, steps land on every graph breakpoint.
NominalTrajectory simulate_nominal(const EstimatorConfig& config, const Network& net, const Vector& x0,
                                   const Vector& theta, const SimulationOptions& options = {});

/// Matrix built from a fixed measurement part and a block repeated once per
/// active edge, so that it follows n_e(t). Alternatively a fixed full matrix
/// can be supplied, valid only for graphs whose edge count matches it.
struct EdgeStructured {
    Matrix measurement;
    Matrix per_edge;
    std::optional<Matrix> fixed;

    /// Vertical layout [measurement; per_edge; …; per_edge] (for Δ̄2).
    Matrix stacked_rows(int edges, Eigen::Index expected_rows) const;
    /// Horizontal layout [measurement, per_edge, …, per_edge] (for Q^OE).
    Matrix stacked_cols(int edges, Eigen::Index expected_cols) const;
};

enum class Variant { standard, output_error };

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

/// δ(t) together with how it enters the error system and the performance
/// output. z = Q x̃ + W δ (standard) or z = Q^OE Λ̄ x̃ + W δ (output error).
struct DisturbanceSpec {
    Eigen::Index size = 0;                 ///< r
    std::function<Vector(double)> delta;   ///< must be pure in t
    Matrix delta1_bar;                     ///< nN × r
    EdgeStructured delta2_bar;             ///< (nN_y + N n_e) × r
    Variant variant = Variant::output_error;
    Matrix q;                              ///< standard: p × nN
    EdgeStructured q_oe;                   ///< output error: p × (nN_y + N n_e)
    Matrix w;                              ///< p × r

    Eigen::Index output_size() const { return w.rows(); }
    void check(const Network& net) const;
};

struct DisturbedTrajectory {
    std::vector<double> t;
    std::vector<Vector> x_tilde;
    std::vector<Vector> z;
    std::vector<Vector> delta;
    double z_energy = 0.0;      ///< ∫ zᵀz, trapezoid on the full step grid
    double delta_energy = 0.0;  ///< ∫ δᵀδ
};

/// Integrates dx̃/dt = −Γ̄Λ̄ᵀΛ̄x̃ + (Γ̄Λ̄ᵀΔ̄2 − Δ̄1)δ(t) and records z.
DisturbedTrajectory simulate_disturbed(const EstimatorConfig& config, const Network& net,
                                       const DisturbanceSpec& dist, const Vector& x0_err,
                                       const SimulationOptions& options = {});

}  // namespace citune
