#include "citune/bench.hpp"

#include "citune/errors.hpp"
#include "citune/parallel.hpp"
#include "citune/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace citune {

double MassSpringParams::k3(double t) const { return k3_0 + 2.0 * d1 * (1.0 - std::cos(0.5 * t)); }

Vector MassSpringParams::theta(double t) const {
    Vector th(3);
    th << 1.0 / k1, k2 / k1, k3(t) / k1;
    return th;
}

double mass_spring_input(int agent, double t) {
    switch (agent) {
        case 0: return std::sin(t);
        case 1: return 2.0 * std::cos(0.5 * t);
        case 2: return 3.0 * std::sin(3.0 * t);
        case 3: return 3.0 * std::cos(2.0 * t);
        case 4: return std::sin(t) + 0.5 * std::cos(t);
        case 5: return 2.0 * std::sin(3.0 * t) + std::cos(0.4 * t);
        default: throw std::out_of_range("mass-spring benchmark has six agents");
    }
}

namespace {

double acceleration(const MassSpringParams& p, int agent, double t, double xi1, double xi2) {
    return (mass_spring_input(agent, t) - p.k2 * xi1 - p.k3(t) * xi2) / p.k1;
}

}  // namespace

std::array<double, 2> PlantTrajectories::state(int agent, double time) const {
    const double slack = 1e-9 * std::max(1.0, horizon());
    if (time < -slack || time > horizon() + slack) {
        std::ostringstream os;
        os << "plant data queried at t = " << time << " outside [0, " << horizon() << "]";
        throw std::out_of_range(os.str());
    }
    const auto last = t.size() - 1;
    const double pos = std::clamp(time / dt, 0.0, static_cast<double>(last));
    auto k = static_cast<std::size_t>(std::floor(pos));
    if (k >= last) k = last - 1;
    const double tau = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
    const auto& a1 = xi1[static_cast<std::size_t>(agent)];
    const auto& a2 = xi2[static_cast<std::size_t>(agent)];
    const auto& ac = accel[static_cast<std::size_t>(agent)];
    if (tau == 0.0) return {a1[k], a2[k]};
    if (tau == 1.0) return {a1[k + 1], a2[k + 1]};
    const double t2 = tau * tau, t3 = t2 * tau;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + tau, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return {h00 * a1[k] + h10 * dt * a2[k] + h01 * a1[k + 1] + h11 * dt * a2[k + 1],
            h00 * a2[k] + h10 * dt * ac[k] + h01 * a2[k + 1] + h11 * dt * ac[k + 1]};
}

PlantTrajectories simulate_plants(const MassSpringParams& params, double horizon, double dt) {
    if (!(params.k1 > 0.0)) throw std::invalid_argument("mass k1 must be positive");
    if (!(horizon > 0.0) || !(dt > 0.0)) throw std::invalid_argument("simulate_plants: horizon and step must be positive");
    const int steps = std::max(1, static_cast<int>(std::ceil(horizon / dt - 1e-9)));
    PlantTrajectories out;
    out.params = params;
    out.dt = horizon / steps;
    out.t.resize(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) out.t[static_cast<std::size_t>(k)] = k == steps ? horizon : k * out.dt;
    out.xi1.assign(kMassSpringAgents, std::vector<double>(out.t.size()));
    out.xi2 = out.xi1;
    out.accel = out.xi1;

    for (int i = 0; i < kMassSpringAgents; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        auto f = [&](double t, double x1, double x2) {
            return std::array<double, 2>{x2, acceleration(params, i, t, x1, x2)};
        };
        double x1 = params.xi1_0[ui], x2 = params.xi2_0[ui];
        const double h = out.dt;
        for (int k = 0; k <= steps; ++k) {
            const double t = out.t[static_cast<std::size_t>(k)];
            out.xi1[ui][static_cast<std::size_t>(k)] = x1;
            out.xi2[ui][static_cast<std::size_t>(k)] = x2;
            out.accel[ui][static_cast<std::size_t>(k)] = acceleration(params, i, t, x1, x2);
            if (k == steps) break;
            const auto k1 = f(t, x1, x2);
            const auto k2 = f(t + 0.5 * h, x1 + 0.5 * h * k1[0], x2 + 0.5 * h * k1[1]);
            const auto k3 = f(t + 0.5 * h, x1 + 0.5 * h * k2[0], x2 + 0.5 * h * k2[1]);
            const auto k4 = f(t + h, x1 + h * k3[0], x2 + h * k3[1]);
            x1 += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
            x2 += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
            if (!std::isfinite(x1) || !std::isfinite(x2)) {
                std::ostringstream os;
                os << "plant " << i + 1 << " diverged at t = " << t + h;
                throw DomainError(error_kind::non_finite, os.str());
            }
        }
    }
    return out;
}

PlantRegressor::PlantRegressor(std::shared_ptr<const PlantTrajectories> plants, int agent)
    : plants_(std::move(plants)), agent_(agent) {
    if (!plants_) throw std::invalid_argument("PlantRegressor: missing plant data");
    if (agent < 0 || agent >= kMassSpringAgents) throw std::out_of_range("PlantRegressor: agent out of range");
}

void PlantRegressor::evaluate(double t, Eigen::Ref<Matrix> out) const {
    const auto s = plants_->state(agent_, t);
    out(0, 0) = mass_spring_input(agent_, t);
    out(0, 1) = -s[0];
    out(0, 2) = -s[1];
}

LreData extract_lre(std::shared_ptr<const PlantTrajectories> plants, double tolerance) {
    if (!plants) throw std::invalid_argument("extract_lre: missing plant data");
    std::vector<std::shared_ptr<const RegressorSource>> agents;
    for (int i = 0; i < kMassSpringAgents; ++i) agents.push_back(std::make_shared<PlantRegressor>(plants, i));
    LreData out{RegressorBank(std::move(agents)), plants, 0.0};

    Matrix c(1, 3);
    for (std::size_t k = 0; k < plants->t.size(); ++k) {
        const double t = plants->t[k];
        const Vector th = plants->params.theta(t);
        for (int i = 0; i < kMassSpringAgents; ++i) {
            out.bank.evaluate(i, t, c);
            const double r = std::abs(plants->accel[static_cast<std::size_t>(i)][k] - (c * th)(0));
            out.max_residual = std::max(out.max_residual, r);
            if (!(r <= tolerance)) {
                std::ostringstream os;
                os << "regression identity violated for agent " << i + 1 << " at t = " << t << " (residual " << r
                   << ")";
                throw DomainError(error_kind::data_inconsistency, os.str());
            }
        }
    }
    return out;
}

const std::array<Scenario, 5>& table_scenarios() {
    static const std::array<Scenario, 5> table{{
        {1, 0.0, 1.0, 0.5, "no parameter variation, high noise, high communication disturbance"},
        {2, 0.5, 1.0, 0.5, "slow parameter variation, high noise, high communication disturbance"},
        {3, 2.0, 0.25, 0.125, "fast parameter variation, low noise, low communication disturbance"},
        {4, 2.0, 0.0, 0.0, "fast parameter variation, no noise, no communication disturbance"},
        {5, 2.0, 1.0, 0.5, "fast parameter variation, high noise, high communication disturbance"},
    }};
    return table;
}

const Scenario& scenario(int id) {
    if (id < 1 || id > 5) throw std::invalid_argument("scenario id must be in 1..5");
    return table_scenarios()[static_cast<std::size_t>(id - 1)];
}

DisturbanceSpec scenario_disturbance(const Scenario& s, int agents, Variant variant) {
    if (agents < 1) throw std::invalid_argument("scenario_disturbance: need at least one agent");
    constexpr int np = 3, r = 3, p = 5;
    DisturbanceSpec d;
    d.size = r;
    const double d1 = s.d1, d2 = s.d2, d3 = s.d3;
    d.delta = [d1, d2, d3](double t) {
        Vector v(3);
        v << d1 * std::sin(0.5 * t), d2 * std::sin(50.0 * t), d3 * std::sin(50.0 * t);
        return v;
    };
    Matrix drift = Matrix::Zero(np, r);
    drift(2, 0) = 1.0;
    d.delta1_bar = kron(Matrix::Ones(agents, 1), drift);

    d.delta2_bar.measurement = Matrix::Zero(agents, r);
    d.delta2_bar.measurement.col(1).setOnes();
    d.delta2_bar.per_edge = Matrix::Zero(np, r);
    d.delta2_bar.per_edge.col(2).setOnes();

    d.variant = variant;
    // standard variant: the first two outputs are the agent-averaged errors of θ1 and θ2
    d.q = Matrix::Zero(p, agents * np);
    for (int i = 0; i < agents; ++i) {
        d.q(0, i * np) = 1.0 / agents;
        d.q(1, i * np + 1) = 1.0 / agents;
    }
    d.q_oe.measurement = Matrix::Zero(p, agents);
    d.q_oe.measurement.row(0).setOnes();
    d.q_oe.per_edge = Matrix::Zero(p, np);
    d.q_oe.per_edge.row(1).setOnes();
    d.w = Matrix::Zero(p, r);
    d.w.bottomRows(r).setIdentity();
    return d;
}

double l2_metric(const std::vector<double>& t, const std::vector<Vector>& z, const std::vector<Vector>& delta) {
    if (t.size() != z.size() || t.size() != delta.size()) throw std::invalid_argument("l2_metric: size mismatch");
    std::vector<double> zz(t.size()), dd(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        zz[k] = z[k].squaredNorm();
        dd[k] = delta[k].squaredNorm();
    }
    const double ez = trapezoid(t, zz), ed = trapezoid(t, dd);
    if (!(std::sqrt(ed) >= 1e-12)) throw DomainError(error_kind::metric_undefined, "metric undefined for zero disturbance");
    return std::sqrt(ez / ed);
}

double l2_metric(const DisturbedTrajectory& traj) {
    if (!(std::sqrt(traj.delta_energy) >= 1e-12))
        throw DomainError(error_kind::metric_undefined, "metric undefined for zero disturbance");
    return std::sqrt(traj.z_energy / traj.delta_energy);
}

Network benchmark_network(const MassSpringParams& plant, const GraphSchedule& graph, double horizon, double step,
                          const std::vector<int>& agents) {
    auto plants = std::make_shared<const PlantTrajectories>(simulate_plants(plant, horizon, 0.5 * step));
    LreData lre = extract_lre(plants);
    if (agents.empty() && graph.node_count() == kMassSpringAgents) return Network(std::move(lre.bank), graph);

    if (!agents.empty() && agents.size() != static_cast<std::size_t>(graph.node_count()))
        throw std::invalid_argument("need one plant per graph node");
    std::vector<std::shared_ptr<const RegressorSource>> sources;
    for (int i = 0; i < graph.node_count(); ++i) {
        const int a = agents.empty() ? i : agents[static_cast<std::size_t>(i)];
        if (a < 0 || a >= kMassSpringAgents) throw std::invalid_argument("mass-spring plant index out of range");
        sources.push_back(std::make_shared<PlantRegressor>(plants, a));
    }
    return Network(RegressorBank(std::move(sources)), graph);
}

double scenario_metric(const Network& net, const Scenario& s, const Matrix& gamma_bar, double alpha,
                       const BenchmarkOptions& options) {
    const DisturbanceSpec dist = scenario_disturbance(s, net.agents(), options.variant);
    const EstimatorConfig cfg{gamma_bar, alpha, options.step, options.horizon};
    SimulationOptions sim;
    sim.record_stride = std::numeric_limits<int>::max();
    return l2_metric(simulate_disturbed(cfg, net, dist, Vector::Zero(net.state_size()), sim));
}

std::size_t SweepResult::best_average() const {
    return static_cast<std::size_t>(std::min_element(average.begin(), average.end()) - average.begin());
}

std::size_t SweepResult::best_for(std::size_t j) const {
    std::size_t best = 0;
    for (std::size_t g = 1; g < gains.size(); ++g)
        if (metric[g][j] < metric[best][j]) best = g;
    return best;
}

namespace {

bool beats_all(const std::vector<double>& values, std::size_t winner, double margin) {
    for (std::size_t k = 0; k < values.size(); ++k)
        if (k != winner && !((1.0 + margin) * values[winner] <= values[k])) return false;
    return true;
}

std::vector<double> column(const SweepResult& sweep, std::size_t j) {
    std::vector<double> out;
    for (const auto& row : sweep.metric) out.push_back(row[j]);
    return out;
}

}  // namespace

SweepOrdering check_ordering(const SweepResult& sweep, std::size_t optimized, double margin) {
    if (optimized >= sweep.gains.size()) throw std::invalid_argument("check_ordering: optimized index out of range");
    SweepOrdering out;
    out.optimized_best_average = beats_all(sweep.average, optimized, margin);
    std::size_t largest = 0;
    for (std::size_t g = 1; g < sweep.gains.size(); ++g)
        if (sweep.gains[g] > sweep.gains[largest]) largest = g;
    for (std::size_t j = 0; j < sweep.scenarios.size(); ++j) {
        const auto col = column(sweep, j);
        switch (sweep.scenarios[j]) {
        case 1: {
            bool any = false;
            for (std::size_t g = 0; g < sweep.gains.size(); ++g)
                if (sweep.gains[g] < sweep.gains[optimized] && beats_all(col, g, margin)) any = true;
            out.lower_gain_wins_s1 = any;
            break;
        }
        case 4: out.largest_wins_s4 = beats_all(col, largest, margin); break;
        case 5: out.optimized_wins_s5 = beats_all(col, optimized, margin); break;
        default: break;
        }
    }
    return out;
}

std::vector<double> sweep_gains(double center, int count, double factor) {
    if (!(center > 0.0) || count < 2 || !(factor > 1.0)) throw std::invalid_argument("sweep_gains: bad arguments");
    std::vector<double> out;
    for (int k = 0; k < count; ++k) out.push_back(center * std::pow(factor, k - 0.5 * (count - 1)));
    return out;
}

SweepResult gain_sweep(const std::vector<double>& gains, const std::vector<int>& scenario_ids, double alpha,
                       const BenchmarkOptions& options) {
    if (gains.size() < 2) throw std::invalid_argument("gain sweep needs at least two gains");
    if (scenario_ids.empty()) throw std::invalid_argument("gain sweep needs at least one scenario");
    for (double g : gains)
        if (!(g > 0.0)) throw std::invalid_argument("swept gains must be positive");

    const std::size_t ns = scenario_ids.size();
    std::vector<std::optional<Network>> nets(ns);
    parallel_for(ns, [&](std::size_t j) {
        MassSpringParams p = options.plant;
        const Scenario& s = scenario(scenario_ids[j]);
        p.d1 = s.d1;
        p.d2 = s.d2;
        p.d3 = s.d3;
        nets[j].emplace(benchmark_network(p, options.graph, options.horizon, options.step, options.agents));
    });

    SweepResult out;
    out.gains = gains;
    out.scenarios = scenario_ids;
    out.metric.assign(gains.size(), std::vector<double>(ns));
    parallel_for(gains.size() * ns, [&](std::size_t cell) {
        const std::size_t g = cell / ns, j = cell % ns;
        const Matrix gamma_bar = gains[g] * Matrix::Identity(nets[j]->state_size(), nets[j]->state_size());
        try {
            out.metric[g][j] = scenario_metric(*nets[j], scenario(scenario_ids[j]), gamma_bar, alpha, options);
        } catch (const DomainError& e) {
            throw DomainError(e.kind(), "scenario " + std::to_string(scenario_ids[j]) + ": " + e.what());
        }
    });
    for (const auto& row : out.metric) {
        double acc = 0.0;
        for (double v : row) acc += v;
        out.average.push_back(acc / static_cast<double>(ns));
    }
    return out;
}

}  // namespace citune
