#include "citune/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <stdexcept>

namespace citune {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Vector sym_eigenvalues(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sym_eigenvalues: matrix not square");
    if (a.rows() == 0) return Vector(0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver did not converge");
    return es.eigenvalues();
}

double lambda_min(const Matrix& a) { return sym_eigenvalues(a)(0); }

double lambda_max(const Matrix& a) {
    const Vector ev = sym_eigenvalues(a);
    return ev(ev.size() - 1);
}

namespace {
Eigen::SelfAdjointEigenSolver<Matrix> full_decomposition(const Matrix& a) {
    if (a.rows() != a.cols() || a.rows() == 0)
        throw std::invalid_argument("eigenpair: matrix must be square and non-empty");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
    if (es.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver did not converge");
    return es;
}
}  // namespace

EigenPair top_eigenpair(const Matrix& a) {
    const auto es = full_decomposition(a);
    const Eigen::Index last = a.rows() - 1;
    return {es.eigenvalues()(last), es.eigenvectors().col(last)};
}

EigenPair bottom_eigenpair(const Matrix& a) {
    const auto es = full_decomposition(a);
    return {es.eigenvalues()(0), es.eigenvectors().col(0)};
}

double sym_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    const Vector ev = sym_eigenvalues(a);
    return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    // λ_max of the smaller Gram matrix.
    if (a.rows() <= a.cols()) return std::sqrt(std::max(0.0, lambda_max(a * a.transpose())));
    return std::sqrt(std::max(0.0, lambda_max(a.transpose() * a)));
}

std::optional<Eigen::Index> cholesky_failure(const Matrix& a, double symmetry_tol) {
    if (a.rows() != a.cols()) return Eigen::Index{0};
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > symmetry_tol * scale) return Eigen::Index{0};
    // Hand-rolled so the failing pivot can be reported.
    const Eigen::Index n = a.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0)) return j;
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    return std::nullopt;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
    Eigen::Index rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Matrix out = Matrix::Zero(rows, cols);
    Eigen::Index r = 0, c = 0;
    for (const auto& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

}  // namespace citune
