#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace citune {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EigenPair {
    double value = 0.0;
    Vector vector;
};

/// Ascending eigenvalues of the symmetric part of `a` (tridiagonal QR).
Vector sym_eigenvalues(const Matrix& a);

double lambda_min(const Matrix& a);
double lambda_max(const Matrix& a);

/// Largest eigenvalue together with a unit eigenvector.
EigenPair top_eigenpair(const Matrix& a);
EigenPair bottom_eigenpair(const Matrix& a);

/// Symmetric spectral norm ‖A‖ = max |λ|.
double sym_norm(const Matrix& a);

/// Induced 2-norm of an arbitrary (rectangular) matrix.
double spectral_norm(const Matrix& a);

Matrix symmetrize(const Matrix& a);

/// Cholesky-based SPD test. Returns the 0-based column at which the
/// factorization broke down, or nullopt when `a` is symmetric positive definite.
std::optional<Eigen::Index> cholesky_failure(const Matrix& a, double symmetry_tol = 1e-12);

Matrix kron(const Matrix& a, const Matrix& b);

Matrix block_diagonal(const std::vector<Matrix>& blocks);

}  // namespace citune
