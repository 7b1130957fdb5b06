#include "citune/estimator.hpp"

#include "citune/errors.hpp"
#include "citune/rk4.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace citune {

Matrix uniform_gain(int agents, const Matrix& g) {
    return kron(Matrix::Identity(agents, agents), g);
}

void validate_config(const EstimatorConfig& config, int agents, Eigen::Index parameters) {
    if (!(config.alpha > 0.0)) throw std::invalid_argument("alpha must be positive (consensus weight)");
    if (!(config.step > 0.0)) throw std::invalid_argument("integration step must be positive");
    if (!(config.horizon >= config.step)) throw std::invalid_argument("horizon must be at least one step");
    const Eigen::Index nn = agents * parameters;
    const Matrix& g = config.gamma_bar;
    if (g.rows() != nn || g.cols() != nn) {
        std::ostringstream os;
        os << "Gamma_bar must be " << nn << "x" << nn << ", got " << g.rows() << "x" << g.cols();
        throw std::invalid_argument(os.str());
    }
    for (int i = 0; i < agents; ++i) {
        for (int j = 0; j < agents; ++j) {
            if (i == j) continue;
            if (g.block(i * parameters, j * parameters, parameters, parameters).cwiseAbs().maxCoeff() != 0.0) {
                std::ostringstream os;
                os << "Gamma_bar must be block diagonal; block (" << i + 1 << "," << j + 1 << ") is nonzero";
                throw std::invalid_argument(os.str());
            }
        }
        const Matrix block = g.block(i * parameters, i * parameters, parameters, parameters);
        if (auto pivot = cholesky_failure(block)) {
            std::ostringstream os;
            os << "Gamma block " << i + 1 << " is not symmetric positive definite (Cholesky fails at pivot "
               << *pivot + 1 << ")";
            throw std::invalid_argument(os.str());
        }
    }
}

Network::Network(RegressorBank bank, GraphSchedule graph) : bank_(std::move(bank)), graph_(std::move(graph)) {
    if (graph_.node_count() != bank_.agents()) {
        std::ostringstream os;
        os << "graph has " << graph_.node_count() << " nodes but the regressor bank has " << bank_.agents()
           << " agents";
        throw std::invalid_argument(os.str());
    }
    const Matrix eye = Matrix::Identity(parameters(), parameters());
    for (std::size_t k = 0; k < graph_.interval_count(); ++k)
        stacked_laplacian_.push_back(kron(graph_.laplacian(k), eye));
}

void Network::information(double t, std::size_t interval, double alpha, Matrix& out) const {
    const Eigen::Index np = parameters();
    out = alpha * stacked_laplacian_[interval];
    Matrix c(outputs(), np);
    for (int i = 0; i < agents(); ++i) {
        bank_.evaluate(i, t, c);
        out.block(i * np, i * np, np, np).noalias() += c.transpose() * c;
    }
}

Matrix Network::information(double t, double alpha) const {
    Matrix out;
    information(t, graph_.interval_index(t), alpha, out);
    return out;
}

namespace {

OutputMap assemble_on(const Network& net, double alpha, double t, std::size_t interval) {
    const Eigen::Index np = net.parameters();
    const Matrix& d = net.graph().incidence(interval);
    OutputMap out;
    out.measurement_rows = net.measurement_rows();
    out.edges = static_cast<int>(d.cols());
    out.lambda = Matrix::Zero(out.measurement_rows + np * d.cols(), net.state_size());
    for (int i = 0; i < net.agents(); ++i)
        net.bank().evaluate(i, t, out.lambda.block(i * net.outputs(), i * np, net.outputs(), np));
    if (d.cols() > 0)
        out.lambda.bottomRows(np * d.cols()) =
            std::sqrt(alpha) * kron(d.transpose(), Matrix::Identity(np, np));
    return out;
}

Vector stacked_measurement_of(const Network& net, double t, const Vector& theta) {
    Vector y(net.measurement_rows());
    Matrix c(net.outputs(), net.parameters());
    for (int i = 0; i < net.agents(); ++i) {
        net.bank().evaluate(i, t, c);
        y.segment(i * net.outputs(), net.outputs()) = c * theta;
    }
    return y;
}

Vector ci_rhs_on(const Vector& x_hat, double t, std::size_t interval, const EstimatorConfig& config,
                 const Network& net, const Vector& y1) {
    const Eigen::Index np = net.parameters();
    Vector grad = config.alpha * (net.stacked_laplacian(interval) * x_hat);
    Matrix c(net.outputs(), np);
    for (int i = 0; i < net.agents(); ++i) {
        net.bank().evaluate(i, t, c);
        const Vector residual = c * x_hat.segment(i * np, np) - y1.segment(i * net.outputs(), net.outputs());
        grad.segment(i * np, np).noalias() += c.transpose() * residual;
    }
    return -(config.gamma_bar * grad);
}

void check_state(const Vector& x, double t, std::size_t step) {
    if (!x.allFinite()) {
        std::ostringstream os;
        os << "integration produced a non-finite state at step " << step << " (t = " << t << ")";
        throw DomainError(error_kind::non_finite, os.str());
    }
    if (x.norm() > 1e150) {
        std::ostringstream os;
        os << "integration diverged at step " << step << " (t = " << t << ", norm " << x.norm() << ")";
        throw DomainError(error_kind::non_finite, os.str());
    }
}

std::vector<StepSegment> segments_for(const EstimatorConfig& config, const Network& net) {
    const auto bps = net.graph().breakpoints();
    return aligned_segments(0.0, config.horizon, config.step, bps,
                            [&](double t) { return net.graph().interval_index(t); });
}

bool keep(std::size_t step, int stride, bool last) {
    return last || step % static_cast<std::size_t>(std::max(stride, 1)) == 0;
}

}  // namespace

OutputMap assemble_lambda(const Network& net, double alpha, double t) {
    if (t < 0.0) throw std::invalid_argument("assemble_lambda: t must be non-negative");
    return assemble_on(net, alpha, t, net.graph().interval_index(t));
}

Vector ci_rhs(const Vector& x_hat, double t, const EstimatorConfig& config, const Network& net, const Vector& y1) {
    if (x_hat.size() != net.state_size() || y1.size() != net.measurement_rows())
        throw std::invalid_argument("ci_rhs: dimension mismatch");
    return ci_rhs_on(x_hat, t, net.graph().interval_index(t), config, net, y1);
}

Vector ci_rhs_gradient(const Vector& x_hat, double t, const EstimatorConfig& config, const Network& net,
                       const Vector& y1) {
    if (x_hat.size() != net.state_size() || y1.size() != net.measurement_rows())
        throw std::invalid_argument("ci_rhs_gradient: dimension mismatch");
    const OutputMap map = assemble_lambda(net, config.alpha, t);
    Vector y = Vector::Zero(map.lambda.rows());
    y.head(map.measurement_rows) = y1;
    return -(config.gamma_bar * (map.lambda.transpose() * (map.lambda * x_hat - y)));
}

Vector affine_disturbed_rhs(const Vector& x_tilde, double t, const EstimatorConfig& config, const Network& net,
                            const Vector& delta_iss) {
    if (x_tilde.size() != net.state_size() || delta_iss.size() != net.state_size())
        throw std::invalid_argument("affine_disturbed_rhs: dimension mismatch");
    return -(config.gamma_bar * (net.information(t, config.alpha) * x_tilde)) + delta_iss;
}

NominalTrajectory simulate_nominal(const EstimatorConfig& config, const Network& net, const Vector& x0,
                                   const Vector& theta, const SimulationOptions& options) {
    validate_config(config, net.agents(), net.parameters());
    if (x0.size() != net.state_size() || theta.size() != net.parameters())
        throw std::invalid_argument("simulate_nominal: x0 must have length nN and theta length N");
    const Vector x_true = theta.replicate(net.agents(), 1);

    NominalTrajectory out;
    auto record = [&](double t, std::size_t interval, const Vector& x) {
        out.t.push_back(t);
        out.x_hat.push_back(x);
        out.x_tilde.push_back(x - x_true);
        if (options.record_outputs) out.y_tilde.push_back(assemble_on(net, config.alpha, t, interval).lambda * (x - x_true));
    };

    const auto segments = segments_for(config, net);
    Vector x = x0;
    record(0.0, segments.front().tag, x);
    std::size_t step = 0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const StepSegment& seg = segments[s];
        auto f = [&](double t, const Vector& y) {
            return ci_rhs_on(y, t, seg.tag, config, net, stacked_measurement_of(net, t, theta));
        };
        for (int k = 0; k < seg.steps; ++k) {
            x = rk4_step(f, seg.node(k), x, seg.step());
            ++step;
            check_state(x, seg.node(k + 1), step);
            const bool last = s + 1 == segments.size() && k + 1 == seg.steps;
            if (keep(step, options.record_stride, last)) record(seg.node(k + 1), seg.tag, x);
        }
    }
    return out;
}

Matrix EdgeStructured::stacked_rows(int edges, Eigen::Index expected_rows) const {
    if (fixed) {
        if (fixed->rows() != expected_rows)
            throw std::invalid_argument("fixed disturbance projection does not match the active edge count");
        return *fixed;
    }
    Matrix out(measurement.rows() + per_edge.rows() * edges, measurement.cols());
    if (per_edge.cols() != measurement.cols() || out.rows() != expected_rows)
        throw std::invalid_argument("edge-structured matrix has inconsistent row layout");
    out.topRows(measurement.rows()) = measurement;
    for (int e = 0; e < edges; ++e) out.middleRows(measurement.rows() + e * per_edge.rows(), per_edge.rows()) = per_edge;
    return out;
}

Matrix EdgeStructured::stacked_cols(int edges, Eigen::Index expected_cols) const {
    if (fixed) {
        if (fixed->cols() != expected_cols)
            throw std::invalid_argument("fixed output matrix does not match the active edge count");
        return *fixed;
    }
    Matrix out(measurement.rows(), measurement.cols() + per_edge.cols() * edges);
    if (per_edge.rows() != measurement.rows() || out.cols() != expected_cols)
        throw std::invalid_argument("edge-structured matrix has inconsistent column layout");
    out.leftCols(measurement.cols()) = measurement;
    for (int e = 0; e < edges; ++e) out.middleCols(measurement.cols() + e * per_edge.cols(), per_edge.cols()) = per_edge;
    return out;
}

const char* to_string(Variant v) { return v == Variant::standard ? "standard" : "oe"; }

Variant parse_variant(const std::string& name) {
    if (name == "standard") return Variant::standard;
    if (name == "oe" || name == "output_error") return Variant::output_error;
    throw std::invalid_argument("unknown LMI variant '" + name + "' (expected standard or oe)");
}

void DisturbanceSpec::check(const Network& net) const {
    if (size < 1) throw std::invalid_argument("disturbance dimension r must be positive");
    if (!delta) throw std::invalid_argument("disturbance signal missing");
    if (delta1_bar.rows() != net.state_size() || delta1_bar.cols() != size)
        throw std::invalid_argument("Delta1_bar must be nN x r");
    if (w.cols() != size || w.rows() < 1) throw std::invalid_argument("W must be p x r");
    for (std::size_t k = 0; k < net.graph().interval_count(); ++k) {
        const auto edges = static_cast<int>(net.graph().intervals()[k].edges.size());
        const Eigen::Index rows = net.measurement_rows() + net.parameters() * edges;
        if (delta2_bar.stacked_rows(edges, rows).cols() != size)
            throw std::invalid_argument("Delta2_bar must have r columns");
        if (variant == Variant::output_error && q_oe.stacked_cols(edges, rows).rows() != w.rows())
            throw std::invalid_argument("Q_OE and W must have the same row count");
    }
    if (variant == Variant::standard && (q.rows() != w.rows() || q.cols() != net.state_size()))
        throw std::invalid_argument("Q must be p x nN");
}

DisturbedTrajectory simulate_disturbed(const EstimatorConfig& config, const Network& net,
                                       const DisturbanceSpec& dist, const Vector& x0_err,
                                       const SimulationOptions& options) {
    validate_config(config, net.agents(), net.parameters());
    dist.check(net);
    if (x0_err.size() != net.state_size()) throw std::invalid_argument("simulate_disturbed: x0 must have length nN");

    // Per-interval projections; Δ̄2 and Q^OE follow the edge count.
    std::vector<Matrix> d2(net.graph().interval_count()), qz(net.graph().interval_count());
    for (std::size_t k = 0; k < d2.size(); ++k) {
        const auto edges = static_cast<int>(net.graph().intervals()[k].edges.size());
        const Eigen::Index rows = net.measurement_rows() + net.parameters() * edges;
        d2[k] = dist.delta2_bar.stacked_rows(edges, rows);
        qz[k] = dist.variant == Variant::output_error ? dist.q_oe.stacked_cols(edges, rows) : dist.q;
    }

    auto output = [&](double t, std::size_t interval, const Vector& x, const Vector& delta) -> Vector {
        if (dist.variant == Variant::standard) return dist.q * x + dist.w * delta;
        return qz[interval] * (assemble_on(net, config.alpha, t, interval).lambda * x) + dist.w * delta;
    };

    DisturbedTrajectory out;
    auto record = [&](double t, const Vector& x, const Vector& z, const Vector& delta) {
        out.t.push_back(t);
        out.x_tilde.push_back(x);
        out.z.push_back(z);
        out.delta.push_back(delta);
    };

    const auto segments = segments_for(config, net);
    Vector x = x0_err;
    Vector delta = dist.delta(0.0);
    Vector z = output(0.0, segments.front().tag, x, delta);
    record(0.0, x, z, delta);
    std::size_t step = 0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const StepSegment& seg = segments[s];
        const std::size_t k_int = seg.tag;
        auto f = [&](double t, const Vector& y) -> Vector {
            const OutputMap map = assemble_on(net, config.alpha, t, k_int);
            const Vector dl = dist.delta(t);
            return config.gamma_bar * (map.lambda.transpose() * (d2[k_int] * dl - map.lambda * y)) -
                   dist.delta1_bar * dl;
        };
        // z jumps with Λ̄ at breakpoints; each segment integrates its own limits.
        z = output(seg.t_begin, k_int, x, delta);
        for (int k = 0; k < seg.steps; ++k) {
            const double t_next = seg.node(k + 1);
            x = rk4_step(f, seg.node(k), x, seg.step());
            ++step;
            check_state(x, t_next, step);
            const Vector delta_next = dist.delta(t_next);
            const Vector z_next = output(t_next, k_int, x, delta_next);
            out.z_energy += 0.5 * seg.step() * (z.squaredNorm() + z_next.squaredNorm());
            out.delta_energy += 0.5 * seg.step() * (delta.squaredNorm() + delta_next.squaredNorm());
            delta = delta_next;
            z = z_next;
            const bool last = s + 1 == segments.size() && k + 1 == seg.steps;
            if (keep(step, options.record_stride, last)) record(t_next, x, z, delta);
        }
    }
    return out;
}

}  // namespace citune
