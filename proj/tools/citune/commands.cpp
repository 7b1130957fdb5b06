#include "commands.hpp"

#include "config.hpp"
#include "svg.hpp"

#include "citune/analysis.hpp"
#include "citune/errors.hpp"
#include "citune/parallel.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace citune::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

ordered_json array_of(const Vector& v) { return ordered_json(std::vector<double>(v.data(), v.data() + v.size())); }

ordered_json optional_pair(std::optional<double> lo, std::optional<double> hi) {
    if (!lo || !hi) return nullptr;
    return ordered_json::array({*lo, *hi});
}

ordered_json optional_bool(const std::optional<bool>& b) { return b ? ordered_json(*b) : ordered_json(nullptr); }

/// Uniform on [−1, 1]^n from a 64-bit Mersenne twister; the mapping of raw
/// draws to doubles is spelled out so outputs match across standard libraries.
Vector seeded_uniform(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0;
    return v;
}

// ---------------------------------------------------------------------------
// shared state for one invocation

struct Flags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::string variant;
    bool svg = false;

    // analysis / tuner
    bool empirical = false;
    int starts = 0;
    double window = 0.0;
    double quad_step = 0.0;
    int cpe_samples = 0;
    double alpha = 0.0;
    double c2 = 0.0;
    double eps_feas = 0.0;
    double relative_tolerance = 0.0;
    std::string policy;

    // simulation / sweep
    std::string scenario;
    double step = 0.0;
    double horizon = 0.0;
    int stride = 0;
    std::string gains;
    int count = 0;
    double factor = 0.0;
};

struct Context {
    RunConfig cfg;
    fs::path out_dir;
    bool svg = false;
    bool empirical = false;
};

bool given(const CLI::App& app, const std::string& name) {
    try {
        return app.get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
        return false;
    }
}

Context prepare(const CLI::App& sub, const Flags& f) {
    Context ctx;
    ctx.cfg = f.config.empty() ? default_config() : validate_config(f.config);
    RunConfig& c = ctx.cfg;
    std::vector<std::string> problems;
    auto positive = [&](const char* name, double v) {
        if (!(v > 0.0)) problems.push_back(std::string(name) + ": must be positive");
        return v;
    };

    if (given(sub, "--out")) c.out_dir = f.out;
    if (given(sub, "--seed")) c.seed = f.seed;
    if (given(sub, "--variant")) {
        try {
            c.tuner.variant = parse_variant(f.variant);
        } catch (const std::exception&) {
            problems.push_back("--variant: expected standard or oe");
        }
    }
    if (given(sub, "--starts")) c.analysis.starts = f.starts;
    if (given(sub, "--window")) c.analysis.window = positive("--window", f.window);
    if (given(sub, "--quad-step")) c.analysis.quad_step = positive("--quad-step", f.quad_step);
    if (given(sub, "--cpe-samples")) c.analysis.cpe_samples = f.cpe_samples;
    if (given(sub, "--alpha")) {
        if (!(f.alpha > 0.0)) problems.push_back("--alpha: consensus weight alpha must be positive");
        c.estimator.alpha = f.alpha;
        c.tuner.alpha = f.alpha;
    }
    if (given(sub, "--c2")) c.tuner.c2 = positive("--c2", f.c2);
    if (given(sub, "--eps-feas")) c.tuner.eps_feas = positive("--eps-feas", f.eps_feas);
    if (given(sub, "--relative-tolerance"))
        c.tuner.relative_tolerance = positive("--relative-tolerance", f.relative_tolerance);
    if (given(sub, "--policy")) {
        try {
            c.tuner.policy = parse_gain_policy(f.policy);
        } catch (const std::exception&) {
            problems.push_back("--policy: expected conservative, midpoint or upper");
        }
    }
    if (given(sub, "--step")) c.estimator.step = positive("--step", f.step);
    if (given(sub, "--horizon")) c.estimator.horizon = positive("--horizon", f.horizon);
    if (given(sub, "--stride")) c.estimator.record_stride = f.stride;
    if (given(sub, "--count")) c.sweep.count = f.count;
    if (given(sub, "--factor")) {
        if (!(f.factor > 1.0)) problems.push_back("--factor: must exceed 1");
        c.sweep.factor = f.factor;
    }
    if (given(sub, "--empirical")) {
        ctx.empirical = f.empirical;
        if (sub.get_name() == "tune") c.tuner.empirical = true;
    }
    if (!problems.empty()) throw ConfigError(problems);

    ctx.svg = f.svg;
    ctx.out_dir = c.out_dir;
    refresh_resolved(c);
    fs::create_directories(ctx.out_dir);
    write_json(ctx.out_dir / "resolved_config.json", c.resolved);
    return ctx;
}

EstimatorConfig estimator_config(const RunConfig& c) {
    return {c.estimator.gamma_bar, c.estimator.alpha, c.estimator.step, c.estimator.horizon};
}

std::vector<int> plant_indices(const RunConfig& c) {
    std::vector<int> out;
    for (const auto& s : c.regressors) out.push_back(s.agent - 1);
    return out;
}

Network make_network(const RunConfig& c, double d1 = 0.0) {
    if (c.builtin_only()) {
        MassSpringParams p = c.plant;
        p.d1 = d1;
        return benchmark_network(p, c.graph, c.estimator.horizon, c.estimator.step, plant_indices(c));
    }
    std::vector<std::shared_ptr<const RegressorSource>> sources;
    for (const auto& s : c.regressors) sources.push_back(load_regressor_table(s.file, c.outputs, c.parameters));
    return Network(RegressorBank(std::move(sources)), c.graph);
}

Vector nominal_theta(const RunConfig& c) { return c.estimator.theta ? *c.estimator.theta : c.plant.theta(0.0); }

Vector initial_estimate(const RunConfig& c, Eigen::Index n) {
    return c.estimator.x0 ? *c.estimator.x0 : seeded_uniform(n, c.seed);
}

void require_benchmark(const RunConfig& c, const char* what) {
    if (!c.builtin_only())
        throw ConfigError({std::string(what) + " needs the builtin mass_spring regressors (scenario disturbances)"});
}

std::vector<int> parse_scenarios(const std::string& text) {
    if (text.empty() || text == "all") return {1, 2, 3, 4, 5};
    std::vector<int> ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int id = std::stoi(item, &used);
            if (used != item.size() || id < 1 || id > 5) throw std::invalid_argument("range");
            ids.push_back(id);
        } catch (const std::exception&) {
            throw ConfigError({"--scenario: expected 1..5, a comma list of them, or all"});
        }
    }
    return ids;
}

std::string state_header(const char* prefix, int agents, Eigen::Index params) {
    std::string out;
    for (int i = 1; i <= agents; ++i)
        for (Eigen::Index k = 1; k <= params; ++k) out += std::string(",") + prefix + "_" + std::to_string(i) + "_" +
                                                          std::to_string(k);
    return out;
}

void append_row(std::string& out, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out += "," + fmt(v(i));
}

std::vector<Series> agent_error_norms(const std::vector<Vector>& x_tilde, int agents, Eigen::Index params) {
    std::vector<Series> out;
    for (int i = 0; i < agents; ++i) {
        Series s{"agent " + std::to_string(i + 1), {}};
        for (const auto& x : x_tilde) s.values.push_back(x.segment(i * params, params).norm());
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Context& ctx, const std::string& scenario_arg, std::ostream& out) {
    const RunConfig& c = ctx.cfg;
    const EstimatorConfig ec = estimator_config(c);
    SimulationOptions sim;
    sim.record_stride = c.estimator.record_stride;

    if (scenario_arg.empty()) {
        const Network net = make_network(c);
        const Vector theta = nominal_theta(c);
        const Vector x0 = initial_estimate(c, net.state_size());
        const NominalTrajectory tr = simulate_nominal(ec, net, x0, theta, sim);

        std::string csv = "t" + state_header("xhat", net.agents(), net.parameters()) +
                          state_header("xtilde", net.agents(), net.parameters()) + "\n";
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            csv += fmt(tr.t[k]);
            append_row(csv, tr.x_hat[k]);
            append_row(csv, tr.x_tilde[k]);
            csv += "\n";
        }
        write_text(ctx.out_dir / "trajectory.csv", csv);

        const double e0 = tr.x_tilde.front().norm(), e1 = tr.x_tilde.back().norm();
        ordered_json j;
        j["kind"] = "nominal";
        j["agents"] = net.agents();
        j["parameters"] = net.parameters();
        j["alpha"] = ec.alpha;
        j["theta"] = array_of(theta);
        j["samples"] = tr.t.size();
        j["initial_error_norm"] = e0;
        j["final_error_norm"] = e1;
        j["error_ratio"] = e1 / e0;
        write_json(ctx.out_dir / "trajectory.json", j);
        if (ctx.svg)
            write_text(ctx.out_dir / "errors.svg",
                       line_plot("Nominal estimation error", tr.t, agent_error_norms(tr.x_tilde, net.agents(),
                                                                                     net.parameters()),
                                 "t", "|error| per agent", true));
        out << j.dump(2) << "\n";
        return 0;
    }

    require_benchmark(c, "simulate --scenario");
    const std::vector<int> ids = parse_scenarios(scenario_arg);
    ordered_json all = ordered_json::array();
    for (int id : ids) {
        const Scenario& s = scenario(id);
        const Network net = make_network(c, s.d1);
        const DisturbanceSpec dist = scenario_disturbance(s, net.agents(), c.tuner.variant);
        // disturbed runs start from zero error unless the config pins x0
        const Vector err0 = c.estimator.x0 ? Vector(*c.estimator.x0 - c.plant.theta(0.0).replicate(net.agents(), 1))
                                           : Vector(Vector::Zero(net.state_size()));
        const DisturbedTrajectory tr = simulate_disturbed(ec, net, dist, err0, sim);

        std::string csv = "t" + state_header("xtilde", net.agents(), net.parameters());
        for (Eigen::Index k = 1; k <= dist.output_size(); ++k) csv += ",z_" + std::to_string(k);
        for (Eigen::Index k = 1; k <= dist.size; ++k) csv += ",delta_" + std::to_string(k);
        csv += "\n";
        for (std::size_t k = 0; k < tr.t.size(); ++k) {
            csv += fmt(tr.t[k]);
            append_row(csv, tr.x_tilde[k]);
            append_row(csv, tr.z[k]);
            append_row(csv, tr.delta[k]);
            csv += "\n";
        }
        const std::string stem = "trajectory_s" + std::to_string(id);
        write_text(ctx.out_dir / (stem + ".csv"), csv);

        ordered_json j;
        j["kind"] = "disturbed";
        j["scenario"] = id;
        j["description"] = s.description;
        j["variant"] = to_string(dist.variant);
        j["agents"] = net.agents();
        j["parameters"] = net.parameters();
        j["alpha"] = ec.alpha;
        j["samples"] = tr.t.size();
        j["initial_error_norm"] = tr.x_tilde.front().norm();
        j["final_error_norm"] = tr.x_tilde.back().norm();
        j["z_energy"] = tr.z_energy;
        j["delta_energy"] = tr.delta_energy;
        j["metric"] = l2_metric(tr);
        write_json(ctx.out_dir / (stem + ".json"), j);
        if (ctx.svg)
            write_text(ctx.out_dir / ("errors_s" + std::to_string(id) + ".svg"),
                       line_plot("Estimation error, scenario " + std::to_string(id), tr.t,
                                 agent_error_norms(tr.x_tilde, net.agents(), net.parameters()), "t",
                                 "|error| per agent", true));
        all.push_back(j);
    }
    out << all.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gramian-bounds

int cmd_gramian_bounds(const Context& ctx, std::ostream& out) {
    const RunConfig& c = ctx.cfg;
    const EstimatorConfig ec = estimator_config(c);
    const Network net = make_network(c);
    const double window = c.analysis.window;

    ordered_json j;
    j["window"] = window;
    j["alpha"] = ec.alpha;

    std::optional<BoundSet> analytic;
    ordered_json analytic_error = nullptr;
    ExcitationReport rep;
    SpectralBounds spec;
    try {
        CpeOptions co;
        co.samples = c.analysis.cpe_samples;
        co.quad_step = c.analysis.quad_step;
        co.r2_step = c.analysis.quad_step;
        rep = cpe_bounds(net.bank(), window, ec.horizon, co);
        ConnectivityOptions go;
        go.horizon = ec.horizon;
        spec = connectivity_on_average(net.graph(), window, go);
        analytic = analytic_bounds(rep, spec, ec, net.agents());
    } catch (const DomainError& e) {
        if (!ctx.empirical) throw;
        analytic_error = {{"error", e.kind()}, {"message", e.what()}};
    }

    std::optional<EmpiricalIota3> emp;
    if (ctx.empirical) {
        EmpiricalOptions eo;
        eo.step = ec.step;
        eo.horizon = ec.horizon;
        emp = empirical_iota3(net, GainRange{ec.gamma_bar, ec.gamma_bar}, ec.alpha, window, c.analysis.starts, eo);
    }

    if (analytic) {
        j["cpe"] = {{"iota1", {rep.iota1_lower, rep.iota1_upper}}, {"r2", rep.r2}};
        j["connectivity"] = {{"lambda_lower", spec.lambda_lower}, {"r3", spec.r3}};
        j["iota2"] = {analytic->iota2_lower, analytic->iota2_upper};
        j["iota3"] = {analytic->iota3_lower, analytic->iota3_upper};
    } else {
        j["cpe"] = nullptr;
        j["connectivity"] = nullptr;
        j["iota2"] = nullptr;
        j["iota3"] = nullptr;
    }
    j["iota3_empirical"] = emp ? optional_pair(emp->lower, emp->upper) : ordered_json(nullptr);
    if (emp) j["iota3_empirical_worst_start"] = emp->worst_start;
    j["phi1"] = analytic ? ordered_json(analytic->phi1) : ordered_json(nullptr);
    j["phi2"] = analytic ? ordered_json(analytic->phi2) : ordered_json(nullptr);

    // κ and the ISS gain use the analytic ι3 when available, else the empirical one.
    std::optional<BoundSet> kb;
    std::string source;
    if (analytic) {
        kb = analytic;
        source = "analytic";
    } else if (emp && emp->lower > 0.0) {
        BoundSet b;
        b.window = window;
        kb = with_iota3(b, emp->lower, emp->upper, ec.gamma_bar);
        source = "empirical";
    }
    j["kappa"] = kb ? ordered_json::array({kb->kappa2, kb->kappa1}) : ordered_json(nullptr);
    j["iss_gain"] = kb ? ordered_json(iss_gain_bound(*kb)) : ordered_json(nullptr);
    j["kappa_source"] = kb ? ordered_json(source) : ordered_json(nullptr);
    if (!analytic_error.is_null()) j["analytic_error"] = analytic_error;

    write_json(ctx.out_dir / "bounds.json", j);
    out << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// tune

ordered_json certificate_json(const TuningCertificate& cert, const Network& net, const FeasibilityResult& replay) {
    ordered_json j;
    const auto& s = cert.scalars;
    j["variant"] = to_string(cert.variant);
    j["gamma"] = s.gamma;
    j["sqrt_gamma"] = cert.sqrt_gamma;
    j["gamma1"] = s.gamma1;
    j["gamma2"] = s.gamma2;
    j["c1"] = s.c1;
    j["c2"] = s.c2;
    j["alpha"] = s.alpha;
    j["residual"] = cert.residual;
    j["constants"] = {{"iota3_lower", cert.constants.iota3_lower},
                      {"iota3_upper", cert.constants.iota3_upper},
                      {"r4", cert.constants.r4},
                      {"window", cert.constants.window}};
    const Vector ev = sym_eigenvalues(cert.gamma_bar);
    j["gamma_bar"] = {{"min_eigenvalue", ev(0)}, {"max_eigenvalue", ev(ev.size() - 1)}, {"size", net.state_size()}};
    j["gain"] = ev(ev.size() - 1);
    j["replay"] = {{"feasible", replay.feasible}, {"residual", replay.residual}};
    return j;
}

int cmd_tune(const Context& ctx, std::ostream& out) {
    const RunConfig& c = ctx.cfg;
    require_benchmark(c, "tune");
    const Network net = make_network(c);
    const DisturbanceSpec dist = scenario_disturbance(scenario(5), net.agents(), c.tuner.variant);
    const auto& t = c.tuner;

    SdpOptions sdp;
    sdp.eps_feas = t.eps_feas;
    sdp.c1_max = t.c1_max;
    sdp.gamma1_max = t.gamma1_max;
    sdp.gamma2_max = t.gamma2_max;
    sdp.relative_tolerance = t.relative_tolerance;

    ordered_json j;
    TuningCertificate cert;
    std::vector<LmiInstance> insts;
    if (t.empirical) {
        const Eigen::Index n = net.state_size();
        TuneOptions opts;
        opts.range = {t.gain_low * Matrix::Identity(n, n), t.gain_high * Matrix::Identity(n, n)};
        opts.window = c.analysis.window;
        opts.alpha = t.alpha;
        opts.c2 = t.c2;
        opts.policy = t.policy;
        opts.alpha_search.alpha_min = t.alpha_min;
        opts.alpha_search.alpha_max = t.alpha_max;
        opts.alpha_search.starts = c.analysis.starts;
        opts.alpha_search.empirical.step = c.estimator.step;
        opts.alpha_search.empirical.horizon = c.estimator.horizon;
        opts.sdp = sdp;
        opts.r2_step = c.analysis.quad_step;
        const TuneResult res = tune_gains(net, dist, opts);
        cert = res.certificate;
        insts = make_instances(net, dist, cert.constants, cert.scalars);

        ordered_json samples = ordered_json::array();
        for (const auto& s : res.alpha.samples)
            samples.push_back({{"alpha", s.alpha}, {"iota3_lower", s.iota3_lower}, {"iota3_upper", s.iota3_upper}});
        j["alpha_search"] = {{"alpha", res.alpha.alpha}, {"ratio", res.alpha.ratio}, {"samples", samples}};
        j["r2"] = res.r2;
        j["r3"] = res.r3;
    } else {
        const double alpha = t.alpha ? *t.alpha : c.estimator.alpha;
        LmiConstants k{t.iota3_lower, t.iota3_upper, t.r4, c.analysis.window};
        LmiScalars s;
        s.alpha = alpha;
        insts = make_instances(net, dist, k, s);
        const double c2 = t.c2 ? *t.c2 : (dist.variant == Variant::standard ? select_c2(insts.front()) : 1.0);
        for (auto& inst : insts) inst.scalars.c2 = c2;
        cert = solve_sdp(std::span<const LmiInstance>(insts), dist.variant, sdp);
        cert.gamma_bar = select_gamma_bar(cert.scalars.gamma1, cert.scalars.gamma2, t.policy, net.state_size());
    }

    for (auto& inst : insts) inst.scalars = cert.scalars;
    const FeasibilityResult replay =
        feasibility_oracle(std::span<const LmiInstance>(insts), cert.variant, t.eps_feas);
    ordered_json cj = certificate_json(cert, net, replay);
    for (auto it = j.begin(); it != j.end(); ++it) cj[it.key()] = it.value();
    write_json(ctx.out_dir / "certificate.json", cj);
    out << cj.dump(2) << "\n";
    return replay.feasible ? 0 : 1;
}

// ---------------------------------------------------------------------------
// evaluate

struct GainSource {
    std::vector<double> gains;
    std::optional<double> certified;
    std::optional<double> sqrt_gamma;
    std::optional<double> alpha;
    std::optional<Variant> variant;
};

GainSource read_gains(const std::string& arg, const RunConfig& c) {
    GainSource g;
    if (arg.empty()) {
        if (c.sweep.gains.empty()) throw ConfigError({"evaluate: pass --gains CERT.json or a comma list"});
        g.gains = c.sweep.gains;
        return g;
    }
    if (fs::exists(arg)) {
        std::ifstream in(arg);
        json doc;
        try {
            in >> doc;
            g.certified = doc.at("gain").get<double>();
            g.sqrt_gamma = doc.at("sqrt_gamma").get<double>();
            g.alpha = doc.at("alpha").get<double>();
            g.variant = parse_variant(doc.at("variant").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError({"--gains: " + arg + " is not a certificate (" + e.what() + ")"});
        }
        g.gains = c.sweep.gains.empty() ? sweep_gains(*g.certified, c.sweep.count, c.sweep.factor) : c.sweep.gains;
        bool present = false;
        for (double v : g.gains) present = present || std::abs(v - *g.certified) <= 1e-12 * *g.certified;
        if (!present) {
            g.gains.push_back(*g.certified);
            std::sort(g.gains.begin(), g.gains.end());
        }
        return g;
    }
    std::stringstream ss(arg);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size() || !(v > 0.0)) throw std::invalid_argument("gain");
            g.gains.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError({"--gains: '" + arg + "' is neither a certificate file nor a list of positive gains"});
        }
    }
    if (g.gains.size() < 2) throw ConfigError({"--gains: need at least two gains"});
    return g;
}

int cmd_evaluate(const Context& ctx, const std::string& gains_arg, const std::string& scenario_arg,
                 std::ostream& out) {
    const RunConfig& c = ctx.cfg;
    require_benchmark(c, "evaluate");
    const GainSource src = read_gains(gains_arg, c);
    const std::vector<int> ids = parse_scenarios(scenario_arg);
    const double alpha = src.alpha ? *src.alpha : c.estimator.alpha;

    BenchmarkOptions opts;
    opts.plant = c.plant;
    opts.graph = c.graph;
    opts.horizon = c.estimator.horizon;
    opts.step = c.estimator.step;
    opts.variant = src.variant ? *src.variant : c.tuner.variant;
    opts.agents = plant_indices(c);
    const SweepResult sweep = gain_sweep(src.gains, ids, alpha, opts);

    std::string csv = "scenario,gain,metric\n";
    for (std::size_t j = 0; j < ids.size(); ++j)
        for (std::size_t g = 0; g < sweep.gains.size(); ++g)
            csv += std::to_string(ids[j]) + "," + fmt(sweep.gains[g]) + "," + fmt(sweep.metric[g][j]) + "\n";
    write_text(ctx.out_dir / "sweep.csv", csv);

    ordered_json j;
    j["alpha"] = alpha;
    j["variant"] = to_string(opts.variant);
    j["gains"] = sweep.gains;
    j["scenarios"] = sweep.scenarios;
    j["average"] = sweep.average;
    j["best_average_gain"] = sweep.gains[sweep.best_average()];
    ordered_json best = ordered_json::object();
    for (std::size_t k = 0; k < ids.size(); ++k) best[std::to_string(ids[k])] = sweep.gains[sweep.best_for(k)];
    j["best_gain_per_scenario"] = best;
    if (src.certified) {
        std::size_t opt = 0;
        for (std::size_t g = 1; g < sweep.gains.size(); ++g)
            if (std::abs(sweep.gains[g] - *src.certified) < std::abs(sweep.gains[opt] - *src.certified)) opt = g;
        ordered_json bound = ordered_json::object();
        bool all_within = true;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const bool ok = sweep.metric[opt][k] <= *src.sqrt_gamma;
            all_within = all_within && ok;
            bound[std::to_string(ids[k])] = ok;
        }
        const SweepOrdering ord = check_ordering(sweep, opt);
        j["certified"] = {{"gain", *src.certified},
                          {"sqrt_gamma", *src.sqrt_gamma},
                          {"metric_within_bound", bound},
                          {"all_within_bound", all_within}};
        j["ordering"] = {{"margin", 0.01},
                         {"optimized_best_average", optional_bool(ord.optimized_best_average)},
                         {"optimized_wins_scenario_5", optional_bool(ord.optimized_wins_s5)},
                         {"largest_wins_scenario_4", optional_bool(ord.largest_wins_s4)},
                         {"lower_gain_wins_scenario_1", optional_bool(ord.lower_gain_wins_s1)}};
    }
    write_json(ctx.out_dir / "summary.json", j);
    if (ctx.svg) {
        std::vector<std::string> cats;
        for (int id : ids) cats.push_back("S" + std::to_string(id));
        cats.push_back("avg");
        std::vector<Series> series;
        for (std::size_t g = 0; g < sweep.gains.size(); ++g) {
            Series s{"gain " + fmt(sweep.gains[g]), sweep.metric[g]};
            s.values.push_back(sweep.average[g]);
            series.push_back(std::move(s));
        }
        write_text(ctx.out_dir / "sweep.svg", bar_chart("Disturbance-to-output metric", cats, series, "metric"));
    }
    out << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Table read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"report: cannot read " + path.string()});
    Table t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(item);
        return out;
    };
    if (std::getline(in, line)) t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split(line)) row.push_back(std::stod(cell));
        if (row.size() != t.header.size()) throw ConfigError({"report: ragged row in " + path.string()});
        t.rows.push_back(std::move(row));
    }
    return t;
}

void render_errors(const fs::path& csv, const fs::path& svg, const std::string& title) {
    const Table t = read_csv(csv);
    std::map<int, std::vector<std::size_t>> cols;  // agent → xtilde columns
    for (std::size_t k = 0; k < t.header.size(); ++k) {
        const std::string& h = t.header[k];
        if (h.rfind("xtilde_", 0) != 0) continue;
        const int agent = std::stoi(h.substr(7, h.find('_', 7) - 7));
        cols[agent].push_back(k);
    }
    std::vector<double> x;
    std::vector<Series> series;
    for (const auto& [agent, idx] : cols) series.push_back({"agent " + std::to_string(agent), {}});
    for (const auto& row : t.rows) {
        x.push_back(row[0]);
        std::size_t s = 0;
        for (const auto& [agent, idx] : cols) {
            double acc = 0.0;
            for (std::size_t k : idx) acc += row[k] * row[k];
            series[s++].values.push_back(std::sqrt(acc));
        }
    }
    write_text(svg, line_plot(title, x, series, "t", "|error| per agent", true));
}

int cmd_report(const Context& ctx, std::ostream& out) {
    ordered_json written = ordered_json::array();
    const fs::path dir = ctx.out_dir;
    if (fs::exists(dir / "sweep.csv")) {
        const Table t = read_csv(dir / "sweep.csv");
        std::vector<int> ids;
        std::vector<double> gains;
        for (const auto& r : t.rows) {
            const int id = static_cast<int>(r[0]);
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
            if (std::find(gains.begin(), gains.end(), r[1]) == gains.end()) gains.push_back(r[1]);
        }
        std::vector<std::string> cats;
        for (int id : ids) cats.push_back("S" + std::to_string(id));
        cats.push_back("avg");
        std::vector<Series> series;
        for (double g : gains) {
            Series s{"gain " + fmt(g), std::vector<double>(ids.size(), std::nan(""))};
            for (const auto& r : t.rows)
                if (r[1] == g)
                    s.values[static_cast<std::size_t>(std::find(ids.begin(), ids.end(), static_cast<int>(r[0])) -
                                                      ids.begin())] = r[2];
            double acc = 0.0;
            for (double v : s.values) acc += v;
            s.values.push_back(acc / static_cast<double>(ids.size()));
            series.push_back(std::move(s));
        }
        write_text(dir / "sweep.svg", bar_chart("Disturbance-to-output metric", cats, series, "metric"));
        written.push_back("sweep.svg");
    }
    std::vector<fs::path> trajectories;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("trajectory", 0) == 0 && e.path().extension() == ".csv") trajectories.push_back(e.path());
    }
    std::sort(trajectories.begin(), trajectories.end());
    for (const auto& p : trajectories) {
        std::string stem = p.stem().string();
        const std::string suffix = stem.substr(std::string("trajectory").size());
        const std::string svg = "errors" + suffix + ".svg";
        const std::string title =
            suffix.empty() ? "Nominal estimation error" : "Estimation error, scenario " + suffix.substr(2);
        render_errors(p, dir / svg, title);
        written.push_back(svg);
    }
    if (written.empty()) throw ConfigError({"report: no sweep.csv or trajectory*.csv in " + dir.string()});
    ordered_json j{{"written", written}};
    out << j.dump(2) << "\n";
    return 0;
}

void error_json(std::ostream& err, const std::string& kind, const std::string& message) {
    err << ordered_json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Consensus + innovations estimator: simulation, Gramian bounds and L2-gain tuning", "citune"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&f](CLI::App* s) {
        s->add_option("--config", f.config, "JSON run configuration");
        s->add_option("--out", f.out, "output directory");
        s->add_option("--seed", f.seed, "seed for random initial estimates");
        s->add_option("--variant", f.variant, "performance output: standard | oe");
        s->add_flag("--svg", f.svg, "also render SVG plots");
    };
    auto sim_flags = [&f](CLI::App* s) {
        s->add_option("--step", f.step, "RK4 step h");
        s->add_option("--horizon", f.horizon, "simulation horizon");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "nominal or disturbed estimator run");
    common(simulate);
    sim_flags(simulate);
    simulate->add_option("--scenario", f.scenario, "1..5, comma list or all (disturbed run)");
    simulate->add_option("--stride", f.stride, "keep every k-th step")->check(CLI::PositiveNumber);
    simulate->add_option("--alpha", f.alpha, "consensus weight");

    CLI::App* bounds = app.add_subcommand("gramian-bounds", "cPE, Gramian and Lyapunov bounds");
    common(bounds);
    sim_flags(bounds);
    bounds->add_flag("--empirical", f.empirical, "also estimate iota3 from the Gramian ODE");
    bounds->add_option("--starts", f.starts, "window starts for the empirical estimate")->check(CLI::PositiveNumber);
    bounds->add_option("--window", f.window, "Gramian window T");
    bounds->add_option("--quad-step", f.quad_step, "Simpson step of the excitation integrals");
    bounds->add_option("--cpe-samples", f.cpe_samples, "sampled window ends")->check(CLI::PositiveNumber);
    bounds->add_option("--alpha", f.alpha, "consensus weight");

    CLI::App* tune = app.add_subcommand("tune", "solve the L2-gain LMI for certified gains");
    common(tune);
    sim_flags(tune);
    tune->add_flag("--empirical", f.empirical, "use empirical Gramian bounds (overrides tuner.bounds)");
    tune->add_option("--starts", f.starts, "window starts per empirical estimate")->check(CLI::PositiveNumber);
    tune->add_option("--window", f.window, "Gramian window T");
    tune->add_option("--alpha", f.alpha, "fixed consensus weight (skips the alpha search)");
    tune->add_option("--c2", f.c2, "fixed multiplier c2");
    tune->add_option("--eps-feas", f.eps_feas, "feasibility margin");
    tune->add_option("--relative-tolerance", f.relative_tolerance, "bisection tolerance on gamma");
    tune->add_option("--policy", f.policy, "gain choice: conservative | midpoint | upper");

    CLI::App* evaluate = app.add_subcommand("evaluate", "measure the disturbance metric over a gain sweep");
    common(evaluate);
    sim_flags(evaluate);
    evaluate->add_option("--gains", f.gains, "certificate JSON or comma-separated gains");
    evaluate->add_option("--scenario", f.scenario, "1..5, comma list or all");
    evaluate->add_option("--alpha", f.alpha, "consensus weight when no certificate is given");
    evaluate->add_option("--count", f.count, "gains in the sweep around the certificate")->check(CLI::Range(2, 1000));
    evaluate->add_option("--factor", f.factor, "ratio between neighbouring swept gains");

    CLI::App* report = app.add_subcommand("report", "render SVG plots from an output directory");
    common(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        error_json(err, "usage", e.what());
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    try {
        if (sub == simulate) return cmd_simulate(prepare(*sub, f), f.scenario, out);
        if (sub == bounds) return cmd_gramian_bounds(prepare(*sub, f), out);
        if (sub == tune) return cmd_tune(prepare(*sub, f), out);
        if (sub == evaluate) return cmd_evaluate(prepare(*sub, f), f.gains, f.scenario, out);
        return cmd_report(prepare(*sub, f), out);
    } catch (const ConfigError& e) {
        ordered_json j{{"error", "config"}, {"message", e.what()}, {"problems", e.problems()}};
        err << j.dump() << "\n";
        return 2;
    } catch (const DomainError& e) {
        error_json(err, e.kind(), e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        error_json(err, "config", e.what());
        return 2;
    } catch (const std::exception& e) {
        error_json(err, "runtime", e.what());
        return 1;
    }
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"citune"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_command(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace citune::cli
