#pragma once

#include "citune/bench.hpp"
#include "citune/estimator.hpp"
#include "citune/graph.hpp"
#include "citune/tuner.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace citune::cli {

/// Schema violations, reported all at once.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct RegressorSpec {
    std::string kind = "builtin";  ///< builtin | table
    std::string name = "mass_spring";
    int agent = 1;                 ///< builtin: 1-based plant index
    std::filesystem::path file;    ///< table: CSV path (relative to the config file)
};

struct EstimatorSettings {
    Matrix gamma_bar;              ///< resolved nN × nN
    double alpha = 1.05;
    double step = 1e-3;
    double horizon = 50.0;
    std::optional<Vector> x0;      ///< default: seeded uniform in [−1, 1]^{nN}
    std::optional<Vector> theta;   ///< default: plant θ(0) for builtin regressors
    int record_stride = 10;
};

struct AnalysisSettings {
    double window = 0.01;          ///< Gramian window T (analytic and empirical bounds, tuner)
    double quad_step = 5e-4;
    int cpe_samples = 1000;
    int starts = 1000;
};

struct TunerSettings {
    Variant variant = Variant::output_error;
    double eps_feas = 1e-8;
    double c1_max = 1e4, gamma1_max = 1e4, gamma2_max = 1e4;
    double relative_tolerance = 1e-4;
    std::optional<double> c2;
    GainPolicy policy = GainPolicy::conservative;
    double gain_low = 0.5, gain_high = 5.0;
    double alpha_min = 1e-2, alpha_max = 10.0;
    std::optional<double> alpha;   ///< fixed α, skipping the search
    bool empirical = true;         ///< ι3 from the Gramian ODE; otherwise from `bounds`
    double iota3_lower = 0.0, iota3_upper = 0.0, r4 = 0.0;
};

struct SweepSettings {
    std::vector<double> gains;     ///< explicit list; empty = log-spaced around the certificate
    int count = 7;
    double factor = 2.0;
};

struct RunConfig {
    std::filesystem::path source;  ///< config file, empty for defaults
    GraphSchedule graph = GraphSchedule::ring(kMassSpringAgents);
    std::vector<RegressorSpec> regressors;
    Eigen::Index parameters = 3;
    Eigen::Index outputs = 1;
    MassSpringParams plant;
    EstimatorSettings estimator;
    AnalysisSettings analysis;
    TunerSettings tuner;
    SweepSettings sweep;
    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "citune_out";
    nlohmann::ordered_json resolved;  ///< echo of every resolved value

    bool builtin_only() const;
};

/// Parses and validates a config document; unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads `path` (JSON). Missing or unparsable files are config errors.
RunConfig validate_config(const std::filesystem::path& path);

/// Defaults only (benchmark setup).
RunConfig default_config();

/// Rebuilds `resolved` after command-line overrides.
void refresh_resolved(RunConfig& cfg);

}  // namespace citune::cli
