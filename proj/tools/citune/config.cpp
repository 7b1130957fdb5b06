#include "config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace citune::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
    return out;
}

class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& where, const std::string& what) { errors.push_back(where + ": " + what); }

    /// Flags keys outside `allowed`; returns false when `obj` is not an object.
    bool object(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
        if (!obj.is_object()) {
            fail(where, "expected an object");
            return false;
        }
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!ok.count(it.key())) fail(where + "." + it.key(), "unknown key");
        return true;
    }

    template <typename Check>
    void number(const json& obj, const char* key, const std::string& where, double& out, Check check,
                const char* requirement) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(where + "." + key, "expected a number");
            return;
        }
        const double x = v.get<double>();
        if (!check(x)) {
            fail(where + "." + key, requirement);
            return;
        }
        out = x;
    }

    void integer(const json& obj, const char* key, const std::string& where, int& out, int min_value) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_number_integer() || v.get<long long>() < min_value) {
            fail(where + "." + key, "expected an integer >= " + std::to_string(min_value));
            return;
        }
        out = v.get<int>();
    }

    std::optional<Vector> vector(const json& v, const std::string& where) {
        if (!v.is_array()) {
            fail(where, "expected an array of numbers");
            return std::nullopt;
        }
        Vector out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                fail(where, "expected an array of numbers");
                return std::nullopt;
            }
            out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
        }
        return out;
    }

    std::optional<Matrix> matrix(const json& v, const std::string& where) {
        if (!v.is_array() || v.empty() || !v[0].is_array()) {
            fail(where, "expected a non-empty array of rows");
            return std::nullopt;
        }
        const std::size_t cols = v[0].size();
        Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_array() || v[i].size() != cols) {
                fail(where, "rows must have equal length");
                return std::nullopt;
            }
            for (std::size_t j = 0; j < cols; ++j) {
                if (!v[i][j].is_number()) {
                    fail(where, "matrix entries must be numbers");
                    return std::nullopt;
                }
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
            }
        }
        return out;
    }
};

const auto positive = [](double x) { return x > 0.0; };
const auto non_negative = [](double x) { return x >= 0.0; };

std::optional<GraphSchedule> read_graph(Reader& r, const json& g) {
    if (!r.object(g, "graph", {"n", "kind", "intervals"})) return std::nullopt;
    int n = kMassSpringAgents;
    r.integer(g, "n", "graph", n, 1);
    const std::string kind = g.value("kind", g.contains("intervals") ? "schedule" : "ring");
    try {
        if (kind == "ring") return GraphSchedule::ring(n);
        if (kind == "path") return GraphSchedule::path(n);
        if (kind != "schedule") {
            r.fail("graph.kind", "expected ring, path or schedule");
            return std::nullopt;
        }
        if (!g.contains("intervals") || !g.at("intervals").is_array()) {
            r.fail("graph.intervals", "expected an array of {t_start, edges}");
            return std::nullopt;
        }
        std::vector<GraphInterval> intervals;
        for (std::size_t k = 0; k < g.at("intervals").size(); ++k) {
            const json& iv = g.at("intervals")[k];
            const std::string where = "graph.intervals[" + std::to_string(k) + "]";
            if (!r.object(iv, where, {"t_start", "edges"})) continue;
            GraphInterval out;
            if (!iv.contains("t_start") || !iv.at("t_start").is_number()) {
                r.fail(where + ".t_start", "expected a number");
                continue;
            }
            out.t_start = iv.at("t_start").get<double>();
            const json edges = iv.value("edges", json::array());
            if (!edges.is_array()) {
                r.fail(where + ".edges", "expected an array of [i, j] pairs");
                continue;
            }
            for (const auto& e : edges) {
                if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
                    r.fail(where + ".edges", "expected [i, j] integer pairs");
                    break;
                }
                out.edges.push_back({e[0].get<int>(), e[1].get<int>()});
            }
            intervals.push_back(std::move(out));
        }
        if (!r.errors.empty()) return std::nullopt;
        return GraphSchedule(n, std::move(intervals));
    } catch (const std::invalid_argument& e) {
        r.fail("graph", e.what());
        return std::nullopt;
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems)), problems_(std::move(problems)) {}

bool RunConfig::builtin_only() const {
    for (const auto& s : regressors)
        if (s.kind != "builtin") return false;
    return true;
}

RunConfig default_config() { return parse_config(json::object()); }

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    Reader r;
    RunConfig cfg;
    if (!r.object(doc, "config",
                  {"graph", "regressors", "dimensions", "plant", "estimator", "analysis", "tuner", "sweep", "seed",
                   "output_dir"}))
        throw ConfigError(r.errors);

    if (doc.contains("graph")) {
        if (auto g = read_graph(r, doc.at("graph"))) cfg.graph = std::move(*g);
    }
    const int n = cfg.graph.node_count();

    if (doc.contains("dimensions")) {
        const json& d = doc.at("dimensions");
        if (r.object(d, "dimensions", {"parameters", "outputs"})) {
            int np = 3, ny = 1;
            r.integer(d, "parameters", "dimensions", np, 1);
            r.integer(d, "outputs", "dimensions", ny, 1);
            cfg.parameters = np;
            cfg.outputs = ny;
        }
    }

    if (doc.contains("regressors")) {
        const json& regs = doc.at("regressors");
        if (!regs.is_array()) {
            r.fail("regressors", "expected an array with one entry per agent");
        } else {
            for (std::size_t i = 0; i < regs.size(); ++i) {
                const std::string where = "regressors[" + std::to_string(i) + "]";
                if (!r.object(regs[i], where, {"kind", "name", "agent", "file"})) continue;
                RegressorSpec s;
                s.kind = regs[i].value("kind", "builtin");
                if (s.kind == "builtin") {
                    s.name = regs[i].value("name", "mass_spring");
                    if (s.name != "mass_spring") r.fail(where + ".name", "only the mass_spring builtin exists");
                    s.agent = static_cast<int>(i) + 1;
                    r.integer(regs[i], "agent", where, s.agent, 1);
                    if (s.agent > kMassSpringAgents) r.fail(where + ".agent", "mass_spring agents are 1..6");
                } else if (s.kind == "table") {
                    if (!regs[i].contains("file") || !regs[i].at("file").is_string()) {
                        r.fail(where + ".file", "table regressors need a CSV file");
                    } else {
                        s.file = regs[i].at("file").get<std::string>();
                        if (s.file.is_relative() && !base_dir.empty()) s.file = base_dir / s.file;
                    }
                } else {
                    r.fail(where + ".kind", "expected builtin or table");
                }
                cfg.regressors.push_back(std::move(s));
            }
            if (static_cast<int>(cfg.regressors.size()) != n)
                r.fail("regressors", "need exactly one regressor per graph node (" + std::to_string(n) + ")");
        }
    } else {
        for (int i = 0; i < n; ++i) cfg.regressors.push_back({"builtin", "mass_spring", i + 1, {}});
    }
    if (cfg.builtin_only() && (cfg.parameters != 3 || cfg.outputs != 1))
        r.fail("dimensions", "builtin mass_spring regressors have 3 parameters and 1 output");

    if (doc.contains("plant")) {
        const json& p = doc.at("plant");
        if (r.object(p, "plant", {"k1", "k2", "k3_0", "xi1_0", "xi2_0"})) {
            r.number(p, "k1", "plant", cfg.plant.k1, positive, "must be positive");
            r.number(p, "k2", "plant", cfg.plant.k2, non_negative, "must be non-negative");
            r.number(p, "k3_0", "plant", cfg.plant.k3_0, non_negative, "must be non-negative");
            for (const char* key : {"xi1_0", "xi2_0"}) {
                if (!p.contains(key)) continue;
                auto v = r.vector(p.at(key), std::string("plant.") + key);
                if (v && v->size() != kMassSpringAgents) {
                    r.fail(std::string("plant.") + key, "expected six initial values");
                } else if (v) {
                    auto& dst = std::string(key) == "xi1_0" ? cfg.plant.xi1_0 : cfg.plant.xi2_0;
                    for (int i = 0; i < kMassSpringAgents; ++i) dst[static_cast<std::size_t>(i)] = (*v)(i);
                }
            }
        }
    }

    const Eigen::Index np = cfg.parameters, nn = n * np;
    auto& est = cfg.estimator;
    est.gamma_bar = Matrix::Identity(nn, nn);
    if (doc.contains("estimator")) {
        const json& e = doc.at("estimator");
        if (r.object(e, "estimator", {"gamma", "alpha", "step", "horizon", "x0", "theta", "record_stride"})) {
            if (e.contains("alpha")) {
                if (!e.at("alpha").is_number() || !(e.at("alpha").get<double>() > 0.0))
                    r.fail("estimator.alpha", "consensus weight alpha must be positive");
                else
                    est.alpha = e.at("alpha").get<double>();
            }
            r.number(e, "step", "estimator", est.step, positive, "must be positive");
            r.number(e, "horizon", "estimator", est.horizon, positive, "must be positive");
            r.integer(e, "record_stride", "estimator", est.record_stride, 1);
            if (e.contains("gamma")) {
                const json& g = e.at("gamma");
                std::vector<Matrix> blocks;
                bool shared = false;  // one block applied to every agent
                if (g.is_number()) {
                    shared = true;
                    blocks.assign(static_cast<std::size_t>(n), g.get<double>() * Matrix::Identity(np, np));
                } else if (g.is_array() && !g.empty() && g[0].is_array() && !g[0].empty() && g[0][0].is_array()) {
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (auto m = r.matrix(g[i], "estimator.gamma[" + std::to_string(i) + "]"))
                            blocks.push_back(*m);
                    if (static_cast<int>(blocks.size()) != n && r.errors.empty())
                        r.fail("estimator.gamma", "expected one block per agent");
                } else if (auto m = r.matrix(g, "estimator.gamma")) {
                    blocks.assign(static_cast<std::size_t>(n), *m);
                    shared = true;
                }
                bool shapes_ok = static_cast<int>(blocks.size()) == n;
                for (std::size_t i = 0; i < (shared ? std::min<std::size_t>(1, blocks.size()) : blocks.size()); ++i) {
                    const std::string where =
                        shared ? std::string("estimator.gamma") : "estimator.gamma block " + std::to_string(i + 1);
                    if (blocks[i].rows() != np || blocks[i].cols() != np) {
                        r.fail(where, "must be " + std::to_string(np) + "x" + std::to_string(np));
                        shapes_ok = false;
                    } else if (auto pivot = cholesky_failure(blocks[i])) {
                        r.fail(where, "not symmetric positive definite (Cholesky fails at pivot " +
                                          std::to_string(*pivot + 1) + ")");
                        shapes_ok = false;
                    }
                }
                if (shapes_ok) est.gamma_bar = block_diagonal(blocks);
            }
            if (e.contains("x0")) {
                auto v = r.vector(e.at("x0"), "estimator.x0");
                if (v && v->size() != nn) r.fail("estimator.x0", "expected " + std::to_string(nn) + " entries");
                else if (v) est.x0 = *v;
            }
            if (e.contains("theta")) {
                auto v = r.vector(e.at("theta"), "estimator.theta");
                if (v && v->size() != np) r.fail("estimator.theta", "expected " + std::to_string(np) + " entries");
                else if (v) est.theta = *v;
            }
            if (est.horizon < est.step) r.fail("estimator.horizon", "must be at least one step");
        }
    }
    if (!cfg.builtin_only() && !est.theta) r.fail("estimator.theta", "required when table regressors are used");

    if (doc.contains("analysis")) {
        const json& a = doc.at("analysis");
        if (r.object(a, "analysis", {"window", "quad_step", "cpe_samples", "starts"})) {
            r.number(a, "window", "analysis", cfg.analysis.window, positive, "must be positive");
            r.number(a, "quad_step", "analysis", cfg.analysis.quad_step, positive, "must be positive");
            r.integer(a, "cpe_samples", "analysis", cfg.analysis.cpe_samples, 1);
            r.integer(a, "starts", "analysis", cfg.analysis.starts, 1);
        }
    }

    if (doc.contains("tuner")) {
        const json& t = doc.at("tuner");
        auto& tu = cfg.tuner;
        if (r.object(t, "tuner",
                     {"variant", "eps_feas", "c1_max", "gamma1_max", "gamma2_max", "relative_tolerance", "c2",
                      "policy", "gain_range", "alpha_range", "alpha", "bounds"})) {
            if (t.contains("variant")) {
                try {
                    tu.variant = parse_variant(t.at("variant").get<std::string>());
                } catch (const std::exception&) {
                    r.fail("tuner.variant", "expected standard or oe");
                }
            }
            if (t.contains("policy")) {
                try {
                    tu.policy = parse_gain_policy(t.at("policy").get<std::string>());
                } catch (const std::exception&) {
                    r.fail("tuner.policy", "expected conservative, midpoint or upper");
                }
            }
            r.number(t, "eps_feas", "tuner", tu.eps_feas, positive, "must be positive");
            r.number(t, "c1_max", "tuner", tu.c1_max, positive, "must be positive");
            r.number(t, "gamma1_max", "tuner", tu.gamma1_max, positive, "must be positive");
            r.number(t, "gamma2_max", "tuner", tu.gamma2_max, positive, "must be positive");
            r.number(t, "relative_tolerance", "tuner", tu.relative_tolerance, positive, "must be positive");
            if (t.contains("c2")) {
                double c2 = 1.0;
                r.number(t, "c2", "tuner", c2, positive, "must be positive");
                tu.c2 = c2;
            }
            if (t.contains("alpha")) {
                if (!t.at("alpha").is_number() || !(t.at("alpha").get<double>() > 0.0))
                    r.fail("tuner.alpha", "consensus weight alpha must be positive");
                else
                    tu.alpha = t.at("alpha").get<double>();
            }
            for (const char* key : {"gain_range", "alpha_range"}) {
                if (!t.contains(key)) continue;
                auto v = r.vector(t.at(key), std::string("tuner.") + key);
                if (v && (v->size() != 2 || !((*v)(0) > 0.0) || !((*v)(1) > (*v)(0)))) {
                    r.fail(std::string("tuner.") + key, "expected [low, high] with 0 < low < high");
                } else if (v) {
                    if (std::string(key) == "gain_range") {
                        tu.gain_low = (*v)(0);
                        tu.gain_high = (*v)(1);
                    } else {
                        tu.alpha_min = (*v)(0);
                        tu.alpha_max = (*v)(1);
                    }
                }
            }
            if (t.contains("bounds")) {
                const json& b = t.at("bounds");
                if (b.is_string() && b.get<std::string>() == "empirical") {
                    tu.empirical = true;
                } else if (r.object(b, "tuner.bounds", {"iota3_lower", "iota3_upper", "r4"})) {
                    tu.empirical = false;
                    for (const char* key : {"iota3_lower", "iota3_upper", "r4"})
                        if (!b.contains(key)) r.fail(std::string("tuner.bounds.") + key, "required");
                    r.number(b, "iota3_lower", "tuner.bounds", tu.iota3_lower, positive, "must be positive");
                    r.number(b, "iota3_upper", "tuner.bounds", tu.iota3_upper, positive, "must be positive");
                    r.number(b, "r4", "tuner.bounds", tu.r4, positive, "must be positive");
                    if (tu.iota3_upper < tu.iota3_lower)
                        r.fail("tuner.bounds", "iota3_upper must be at least iota3_lower");
                }
            }
        }
    }

    if (doc.contains("sweep")) {
        const json& s = doc.at("sweep");
        if (r.object(s, "sweep", {"gains", "count", "factor"})) {
            if (s.contains("gains")) {
                auto v = r.vector(s.at("gains"), "sweep.gains");
                if (v && (v->size() < 2 || !(v->minCoeff() > 0.0)))
                    r.fail("sweep.gains", "expected at least two positive gains");
                else if (v)
                    cfg.sweep.gains.assign(v->data(), v->data() + v->size());
            }
            r.integer(s, "count", "sweep", cfg.sweep.count, 2);
            r.number(s, "factor", "sweep", cfg.sweep.factor, [](double x) { return x > 1.0; }, "must exceed 1");
        }
    }

    if (doc.contains("seed")) {
        const json& s = doc.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
            r.fail("seed", "expected a non-negative integer");
        else
            cfg.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string()) r.fail("output_dir", "expected a string");
        else cfg.out_dir = doc.at("output_dir").get<std::string>();
    }

    if (!r.errors.empty()) throw ConfigError(r.errors);
    refresh_resolved(cfg);
    return cfg;
}

RunConfig validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path.string() + ": cannot open config file"});
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError({path.string() + ": " + e.what()});
    }
    RunConfig cfg = parse_config(doc, path.parent_path());
    cfg.source = path;
    refresh_resolved(cfg);
    return cfg;
}

namespace {

ordered_json matrix_json(const Matrix& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

ordered_json vector_json(const Vector& v) { return ordered_json(std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

void refresh_resolved(RunConfig& cfg) {
    ordered_json j;
    ordered_json graph;
    graph["n"] = cfg.graph.node_count();
    graph["kind"] = "schedule";
    ordered_json ivs = ordered_json::array();
    for (const auto& iv : cfg.graph.intervals()) {
        ordered_json edges = ordered_json::array();
        for (const auto& e : iv.edges) edges.push_back({e.source, e.sink});
        ivs.push_back({{"t_start", iv.t_start}, {"edges", edges}});
    }
    graph["intervals"] = ivs;
    j["graph"] = graph;

    ordered_json regs = ordered_json::array();
    for (const auto& s : cfg.regressors) {
        if (s.kind == "builtin")
            regs.push_back({{"kind", "builtin"}, {"name", s.name}, {"agent", s.agent}});
        else
            regs.push_back({{"kind", "table"}, {"file", s.file.string()}});
    }
    j["regressors"] = regs;
    j["dimensions"] = {{"parameters", cfg.parameters}, {"outputs", cfg.outputs}};
    j["plant"] = {{"k1", cfg.plant.k1},
                  {"k2", cfg.plant.k2},
                  {"k3_0", cfg.plant.k3_0},
                  {"xi1_0", cfg.plant.xi1_0},
                  {"xi2_0", cfg.plant.xi2_0}};

    const auto& e = cfg.estimator;
    ordered_json est;
    const Eigen::Index np = cfg.parameters;
    ordered_json blocks = ordered_json::array();
    for (int i = 0; i < cfg.graph.node_count(); ++i)
        blocks.push_back(matrix_json(e.gamma_bar.block(i * np, i * np, np, np)));
    est["gamma"] = blocks;
    est["alpha"] = e.alpha;
    est["step"] = e.step;
    est["horizon"] = e.horizon;
    if (e.x0) est["x0"] = vector_json(*e.x0);
    if (e.theta) est["theta"] = vector_json(*e.theta);
    est["record_stride"] = e.record_stride;
    j["estimator"] = est;

    const auto& a = cfg.analysis;
    j["analysis"] = {{"window", a.window},
                     {"quad_step", a.quad_step},
                     {"cpe_samples", a.cpe_samples},
                     {"starts", a.starts}};

    const auto& t = cfg.tuner;
    ordered_json tu;
    tu["variant"] = to_string(t.variant);
    tu["eps_feas"] = t.eps_feas;
    tu["c1_max"] = t.c1_max;
    tu["gamma1_max"] = t.gamma1_max;
    tu["gamma2_max"] = t.gamma2_max;
    tu["relative_tolerance"] = t.relative_tolerance;
    if (t.c2) tu["c2"] = *t.c2;
    tu["policy"] = t.policy == GainPolicy::conservative ? "conservative"
                   : t.policy == GainPolicy::midpoint   ? "midpoint"
                                                        : "upper";
    tu["gain_range"] = {t.gain_low, t.gain_high};
    tu["alpha_range"] = {t.alpha_min, t.alpha_max};
    if (t.alpha) tu["alpha"] = *t.alpha;
    if (t.empirical)
        tu["bounds"] = "empirical";
    else
        tu["bounds"] = {{"iota3_lower", t.iota3_lower}, {"iota3_upper", t.iota3_upper}, {"r4", t.r4}};
    j["tuner"] = tu;

    ordered_json sw;
    if (!cfg.sweep.gains.empty()) sw["gains"] = cfg.sweep.gains;
    sw["count"] = cfg.sweep.count;
    sw["factor"] = cfg.sweep.factor;
    j["sweep"] = sw;
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.out_dir.string();
    cfg.resolved = std::move(j);
}

}  // namespace citune::cli
