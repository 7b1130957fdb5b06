#pragma once

#include "citune/linalg.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

namespace citune {

/// Time-dependent local regressor t ↦ C_i(t) ∈ R^{N_y × N}.
/// Implementations must be pure functions of t (safe for concurrent calls).
class RegressorSource {
public:
    virtual ~RegressorSource() = default;
    virtual Eigen::Index outputs() const = 0;     ///< N_y
    virtual Eigen::Index parameters() const = 0;  ///< N
    virtual void evaluate(double t, Eigen::Ref<Matrix> out) const = 0;
};

class ConstantRegressor final : public RegressorSource {
public:
    explicit ConstantRegressor(Matrix c) : c_(std::move(c)) {}
    Eigen::Index outputs() const override { return c_.rows(); }
    Eigen::Index parameters() const override { return c_.cols(); }
    void evaluate(double, Eigen::Ref<Matrix> out) const override { out = c_; }

private:
    Matrix c_;
};

/// Closed-form regressor signal.
class FunctionRegressor final : public RegressorSource {
public:
    using Fn = std::function<Matrix(double)>;
    FunctionRegressor(Eigen::Index outputs, Eigen::Index parameters, Fn fn)
        : rows_(outputs), cols_(parameters), fn_(std::move(fn)) {}
    Eigen::Index outputs() const override { return rows_; }
    Eigen::Index parameters() const override { return cols_; }
    void evaluate(double t, Eigen::Ref<Matrix> out) const override;

private:
    Eigen::Index rows_, cols_;
    Fn fn_;
};

/// Sampled regressor with linear interpolation between strictly increasing
/// sample times; evaluation outside the table is rejected.
class TableRegressor final : public RegressorSource {
public:
    TableRegressor(std::vector<double> times, std::vector<Matrix> values);
    Eigen::Index outputs() const override { return values_.front().rows(); }
    Eigen::Index parameters() const override { return values_.front().cols(); }
    void evaluate(double t, Eigen::Ref<Matrix> out) const override;

    double t_begin() const { return times_.front(); }
    double t_end() const { return times_.back(); }

private:
    std::vector<double> times_;
    std::vector<Matrix> values_;
};

/// Reads a CSV table `t, c_11, c_12, ..., c_{N_y N}` (row-major entries of
/// C_i(t)); a non-numeric first line is treated as a header.
std::shared_ptr<const TableRegressor> load_regressor_table(const std::filesystem::path& file,
                                                           Eigen::Index outputs,
                                                           Eigen::Index parameters);

/// The regressors C_1..C_n of all agents. All agents share N and N_y.
class RegressorBank {
public:
    explicit RegressorBank(std::vector<std::shared_ptr<const RegressorSource>> agents);

    int agents() const { return static_cast<int>(agents_.size()); }
    Eigen::Index parameters() const { return n_params_; }
    Eigen::Index outputs() const { return n_outputs_; }
    Eigen::Index stacked_size() const { return agents() * n_params_; }  ///< nN

    void evaluate(int agent, double t, Eigen::Ref<Matrix> out) const { agents_[agent]->evaluate(t, out); }
    Matrix regressor(int agent, double t) const;

    /// C̄(t) = diag(C_1, ..., C_n), size nN_y × nN.
    Matrix stacked(double t) const;
    /// Σ_i C_iᵀ(t) C_i(t).
    Matrix gram_sum(double t) const;

private:
    std::vector<std::shared_ptr<const RegressorSource>> agents_;
    Eigen::Index n_params_ = 0;
    Eigen::Index n_outputs_ = 0;
};

struct ExcitationReport {
    double window = 0.0;         ///< T
    double iota1_lower = 0.0;    ///< min λ_min over sampled windows
    double iota1_upper = 0.0;    ///< max λ_max over sampled windows
    double r2 = 0.0;             ///< sup ‖C_iᵀ C_i‖
    double worst_window_end = 0.0;
};

/// ∫_{t-T}^t Σ_i C_iᵀ C_i ds by composite Simpson with step ≈ quad_step.
Matrix cpe_window(const RegressorBank& bank, double t, double window, double quad_step = 5e-4);

struct CpeOptions {
    int samples = 1000;          ///< uniformly spaced window ends in [T, horizon]
    double quad_step = 5e-4;     ///< Simpson step (default h/2 for h = 1e-3)
    double r2_step = 5e-4;       ///< grid for sup ‖C_iᵀ C_i‖ over [0, horizon]
    double relative_tolerance = 1e-10;  ///< ι̲1 ≤ tol·ῑ1 counts as lost excitation
    double t_begin = 0.0;        ///< windows end no earlier than t_begin + T
};

/// Excitation constants over [T, horizon]. Throws DomainError(cpe_violated)
/// naming the worst window when the lower bound vanishes.
ExcitationReport cpe_bounds(const RegressorBank& bank, double window, double horizon,
                            const CpeOptions& options = {});

/// sup_t max_i ‖C_iᵀ(t) C_i(t)‖ sampled on a uniform grid of step `step`.
double regressor_bound(const RegressorBank& bank, double t0, double t1, double step);

/// r4 = r2 + α r3.
double r4_constant(const ExcitationReport& report, double alpha, double r3);

}  // namespace citune
