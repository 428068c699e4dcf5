#pragma once

#include <Eigen/Dense>

namespace isgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Eigendecomposition of a symmetric matrix (values sorted descending,
/// columns of `vectors` are the matching eigenvectors).
struct SymmetricEigen {
    Vector values;
    Matrix vectors;
    int sweeps = 0;
};

bool is_symmetric(const Matrix& a, double tol = 1e-10);

/**
 * Cyclic Jacobi rotations for a symmetric matrix. Sweeps row by row
 * until the off-diagonal Frobenius norm falls below tol * ||A||_F.
 * Intended for the moderate sizes used here (p up to a few hundred).
 */
SymmetricEigen jacobi_eigen(const Matrix& a, double tol = 1e-12, int max_sweeps = 100);

} // namespace isgd
