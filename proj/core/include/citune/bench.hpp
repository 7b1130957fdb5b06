#pragma once

#include "citune/estimator.hpp"
#include "citune/excitation.hpp"
#include "citune/graph.hpp"

#include <array>
#include <memory>
#include <optional>
#include <vector>

namespace citune {

inline constexpr int kMassSpringAgents = 6;

/// Six identical mass–spring–damper plants driven by fixed inputs.
/// k1, k2 and k3(0) and the initial states are modelling defaults.
struct MassSpringParams {
    double k1 = 1.0;    ///< mass
    double k2 = 1.0;    ///< spring
    double k3_0 = 1.0;  ///< damper at t = 0
    double d1 = 0.0;    ///< damper drift amplitude, k̇3 = d1 sin(0.5 t)
    double d2 = 0.0;    ///< measurement noise amplitude
    double d3 = 0.0;    ///< communication noise amplitude
    std::array<double, kMassSpringAgents> xi1_0{0.5, -0.5, 1.0, -1.0, 0.25, -0.25};
    std::array<double, kMassSpringAgents> xi2_0{-0.5, 1.0, -0.25, 0.5, -1.0, 0.75};

    double k3(double t) const;
    /// θ(t) = [1/k1, k2/k1, k3(t)/k1].
    Vector theta(double t) const;
};

/// Input u_i(t) of agent i (0-based).
double mass_spring_input(int agent, double t);

/// Sampled plant states on a uniform grid t_k = k·dt.
struct PlantTrajectories {
    MassSpringParams params;
    double dt = 0.0;
    std::vector<double> t;
    /// [agent][k]
    std::vector<std::vector<double>> xi1, xi2, accel;

    double horizon() const { return t.back(); }
    /// Cubic Hermite interpolation of (ξ1, ξ2) using the plant vector field
    /// for the slopes; exact at grid nodes.
    std::array<double, 2> state(int agent, double time) const;
};

/// RK4 integration of all plants with step dt (default h/2 so that every
/// RK4 stage of the estimator lands on a plant sample).
PlantTrajectories simulate_plants(const MassSpringParams& params, double horizon, double dt);

/// C_i(t) = [u_i(t), −ξ1,i(t), −ξ2,i(t)] from simulated plant data.
class PlantRegressor final : public RegressorSource {
public:
    PlantRegressor(std::shared_ptr<const PlantTrajectories> plants, int agent);
    Eigen::Index outputs() const override { return 1; }
    Eigen::Index parameters() const override { return 3; }
    void evaluate(double t, Eigen::Ref<Matrix> out) const override;

private:
    std::shared_ptr<const PlantTrajectories> plants_;
    int agent_;
};

struct LreData {
    RegressorBank bank;
    std::shared_ptr<const PlantTrajectories> plants;
    double max_residual = 0.0;  ///< max |ξ̇2,i − C_iθ| over the plant grid
};

/// Recasts the plants as y_i = C_i θ and checks the identity on every
/// sample (DomainError(data_inconsistency) above `tolerance`).
LreData extract_lre(std::shared_ptr<const PlantTrajectories> plants, double tolerance = 1e-8);

struct Scenario {
    int id = 0;
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
    const char* description = "";
};

const std::array<Scenario, 5>& table_scenarios();
const Scenario& scenario(int id);

/// δ(t) = [d1 sin 0.5t, d2 sin 50t, d3 sin 50t] with the benchmark projections
/// and output-error performance output, for n agents with N = 3, N_y = 1.
DisturbanceSpec scenario_disturbance(const Scenario& s, int agents = kMassSpringAgents,
                                     Variant variant = Variant::output_error);

/// sqrt(∫zᵀz / ∫δᵀδ) by the trapezoid rule on the given grid.
double l2_metric(const std::vector<double>& t, const std::vector<Vector>& z, const std::vector<Vector>& delta);
/// Same ratio from energies accumulated during integration.
double l2_metric(const DisturbedTrajectory& traj);

struct BenchmarkOptions {
    MassSpringParams plant;        ///< d1..d3 are overridden per scenario
    GraphSchedule graph = GraphSchedule::ring(kMassSpringAgents);
    double horizon = 50.0;
    double step = 1e-3;
    Variant variant = Variant::output_error;
    std::vector<int> agents;       ///< 0-based plant per graph node; empty = identity
};

/// Plant simulation + LRE for the given plant parameters.
Network benchmark_network(const MassSpringParams& plant, const GraphSchedule& graph, double horizon, double step,
                          const std::vector<int>& agents = {});

/// Disturbed run of one scenario from zero initial error with Γ̄ = gain·I.
double scenario_metric(const Network& net, const Scenario& s, const Matrix& gamma_bar, double alpha,
                       const BenchmarkOptions& options);

struct SweepResult {
    std::vector<double> gains;
    std::vector<int> scenarios;
    std::vector<std::vector<double>> metric;  ///< [gain][scenario]
    std::vector<double> average;              ///< per gain

    std::size_t best_average() const;
    /// Index of the gain with the smallest metric for scenario column j.
    std::size_t best_for(std::size_t j) const;
};

/// Log-spaced gains center·factor^{k − (count−1)/2}, k = 0..count−1.
/// Ordering claims on a sweep. A cell "wins" when its metric beats every
/// other gain in that column by the relative margin. Empty when the needed
/// scenario column is missing.
struct SweepOrdering {
    std::optional<bool> optimized_best_average;  ///< per-gain average over all columns
    std::optional<bool> optimized_wins_s5;
    std::optional<bool> largest_wins_s4;
    std::optional<bool> lower_gain_wins_s1;
};

SweepOrdering check_ordering(const SweepResult& sweep, std::size_t optimized, double margin = 0.01);

std::vector<double> sweep_gains(double center, int count = 7, double factor = 2.0);

/// Metric for every (gain, scenario) cell with Γ̄ = gain·I and fixed α.
SweepResult gain_sweep(const std::vector<double>& gains, const std::vector<int>& scenario_ids, double alpha,
                       const BenchmarkOptions& options);

}  // namespace citune
