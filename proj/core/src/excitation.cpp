#include "citune/excitation.hpp"

#include "citune/errors.hpp"
#include "citune/parallel.hpp"
#include "citune/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace citune {

void FunctionRegressor::evaluate(double t, Eigen::Ref<Matrix> out) const {
    const Matrix c = fn_(t);
    if (c.rows() != rows_ || c.cols() != cols_)
        throw std::runtime_error("FunctionRegressor: evaluator returned wrong dimensions");
    out = c;
}

TableRegressor::TableRegressor(std::vector<double> times, std::vector<Matrix> values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() < 2 || times_.size() != values_.size())
        throw std::invalid_argument("regressor table needs at least two samples with matching values");
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (!(times_[k] > times_[k - 1])) throw std::invalid_argument("regressor table times must increase strictly");
        if (values_[k].rows() != values_[0].rows() || values_[k].cols() != values_[0].cols())
            throw std::invalid_argument("regressor table rows have inconsistent dimensions");
    }
}

void TableRegressor::evaluate(double t, Eigen::Ref<Matrix> out) const {
    const double slack = 1e-12 * std::max(1.0, std::abs(times_.back()));
    if (t < times_.front() - slack || t > times_.back() + slack) {
        std::ostringstream os;
        os << "regressor table queried at t = " << t << " outside [" << times_.front() << ", " << times_.back() << "]";
        throw std::out_of_range(os.str());
    }
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    if (k + 1 >= times_.size()) k = times_.size() - 2;
    const double w = std::clamp((t - times_[k]) / (times_[k + 1] - times_[k]), 0.0, 1.0);
    out = (1.0 - w) * values_[k] + w * values_[k + 1];
}

std::shared_ptr<const TableRegressor> load_regressor_table(const std::filesystem::path& file,
                                                           Eigen::Index outputs, Eigen::Index parameters) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot open regressor table " + file.string());
    std::vector<double> times;
    std::vector<Matrix> values;
    std::string line;
    std::size_t line_no = 0;
    const auto expected = static_cast<std::size_t>(1 + outputs * parameters);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (times.empty() && line_no == 1) continue;  // header
            throw std::invalid_argument(file.string() + ":" + std::to_string(line_no) + ": non-numeric entry");
        }
        if (row.size() != expected)
            throw std::invalid_argument(file.string() + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(expected) + " columns");
        Matrix c(outputs, parameters);
        for (Eigen::Index i = 0; i < outputs; ++i)
            for (Eigen::Index j = 0; j < parameters; ++j)
                c(i, j) = row[static_cast<std::size_t>(1 + i * parameters + j)];
        times.push_back(row[0]);
        values.push_back(std::move(c));
    }
    return std::make_shared<const TableRegressor>(std::move(times), std::move(values));
}

RegressorBank::RegressorBank(std::vector<std::shared_ptr<const RegressorSource>> agents)
    : agents_(std::move(agents)) {
    if (agents_.empty()) throw std::invalid_argument("regressor bank needs at least one agent");
    for (const auto& a : agents_)
        if (!a) throw std::invalid_argument("regressor bank: null regressor");
    n_params_ = agents_.front()->parameters();
    n_outputs_ = agents_.front()->outputs();
    if (n_params_ < 1 || n_outputs_ < 1) throw std::invalid_argument("regressor bank: empty regressor dimensions");
    for (const auto& a : agents_)
        if (a->parameters() != n_params_ || a->outputs() != n_outputs_)
            throw std::invalid_argument("regressor bank: agents disagree on N or N_y");
}

Matrix RegressorBank::regressor(int agent, double t) const {
    Matrix c(n_outputs_, n_params_);
    evaluate(agent, t, c);
    return c;
}

Matrix RegressorBank::stacked(double t) const {
    Matrix out = Matrix::Zero(agents() * n_outputs_, agents() * n_params_);
    for (int i = 0; i < agents(); ++i)
        evaluate(i, t, out.block(i * n_outputs_, i * n_params_, n_outputs_, n_params_));
    return out;
}

Matrix RegressorBank::gram_sum(double t) const {
    Matrix acc = Matrix::Zero(n_params_, n_params_);
    Matrix c(n_outputs_, n_params_);
    for (int i = 0; i < agents(); ++i) {
        evaluate(i, t, c);
        acc.noalias() += c.transpose() * c;
    }
    return acc;
}

Matrix cpe_window(const RegressorBank& bank, double t, double window, double quad_step) {
    if (!(window > 0.0)) throw std::invalid_argument("cpe_window: window must be positive");
    if (t < window) throw std::invalid_argument("cpe_window: t must be at least T");
    if (!(quad_step > 0.0)) throw std::invalid_argument("cpe_window: quadrature step must be positive");
    int m = static_cast<int>(std::ceil(window / quad_step - 1e-9));
    if (m < 2) m = 2;
    if (m % 2) ++m;
    const double h = window / m;
    const auto w = simpson_weights(m, h);
    Matrix acc = Matrix::Zero(bank.parameters(), bank.parameters());
    const double t0 = t - window;
    for (int k = 0; k <= m; ++k) acc += w[static_cast<std::size_t>(k)] * bank.gram_sum(k == m ? t : t0 + k * h);
    return symmetrize(acc);
}

double regressor_bound(const RegressorBank& bank, double t0, double t1, double step) {
    if (!(step > 0.0) || t1 < t0) throw std::invalid_argument("regressor_bound: bad grid");
    const auto count = static_cast<std::size_t>(std::ceil((t1 - t0) / step - 1e-9)) + 1;
    std::vector<double> local(count, 0.0);
    parallel_for(count, [&](std::size_t k) {
        const double t = std::min(t1, t0 + static_cast<double>(k) * step);
        Matrix c(bank.outputs(), bank.parameters());
        double best = 0.0;
        for (int i = 0; i < bank.agents(); ++i) {
            bank.evaluate(i, t, c);
            best = std::max(best, spectral_norm(c) * spectral_norm(c));
        }
        local[k] = best;
    });
    return *std::max_element(local.begin(), local.end());
}

ExcitationReport cpe_bounds(const RegressorBank& bank, double window, double horizon, const CpeOptions& options) {
    if (!(window > 0.0)) throw std::invalid_argument("cpe_bounds: window must be positive");
    if (horizon < options.t_begin + 2.0 * window) throw std::invalid_argument("cpe_bounds: horizon must be at least 2T");
    if (options.samples < 1) throw std::invalid_argument("cpe_bounds: need at least one sample");

    const double first = options.t_begin + window;
    const auto count = static_cast<std::size_t>(options.samples);
    std::vector<double> lo(count), hi(count), ends(count);
    parallel_for(count, [&](std::size_t k) {
        const double t = count == 1 ? first : first + (horizon - first) * static_cast<double>(k) / (count - 1);
        const Vector ev = sym_eigenvalues(cpe_window(bank, t, window, options.quad_step));
        ends[k] = t;
        lo[k] = ev(0);
        hi[k] = ev(ev.size() - 1);
    });

    ExcitationReport out;
    out.window = window;
    const auto worst = std::min_element(lo.begin(), lo.end()) - lo.begin();
    out.iota1_lower = lo[static_cast<std::size_t>(worst)];
    out.worst_window_end = ends[static_cast<std::size_t>(worst)];
    out.iota1_upper = *std::max_element(hi.begin(), hi.end());
    out.r2 = regressor_bound(bank, 0.0, horizon, options.r2_step);

    if (!(out.iota1_lower > options.relative_tolerance * out.iota1_upper) || !(out.iota1_upper > 0.0)) {
        std::ostringstream os;
        os << "cPE violated: window [" << out.worst_window_end - window << ", " << out.worst_window_end
           << "] has smallest eigenvalue " << out.iota1_lower << " (largest over all windows " << out.iota1_upper << ")";
        throw DomainError(error_kind::cpe_violated, os.str());
    }
    return out;
}

double r4_constant(const ExcitationReport& report, double alpha, double r3) {
    if (!(alpha > 0.0)) throw std::invalid_argument("r4_constant: alpha must be positive");
    return report.r2 + alpha * r3;
}

}  // namespace citune
