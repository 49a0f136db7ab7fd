#pragma once

#include <Eigen/Dense>

#include "noisecast/errors.hpp"

namespace noisecast {

using Matrix = Eigen::MatrixXd;  // column-major, doubles
using Vector = Eigen::VectorXd;

// Relative cutoff for declaring singular values zero: s <= cutoff * s_max
// is treated as rank-deficient direction.  Must lie in [0, 1).
struct RankTolerance {
    double relative_cutoff = 1e-10;
};

// Thin SVD truncated to the numerical rank: X ~= left * diag(s) * right'.
struct ReducedSvd {
    Matrix left;             // n x r, orthonormal columns
    Vector singular_values;  // r, strictly positive, nonincreasing
    Matrix right;            // p x r, orthonormal columns

    Eigen::Index rank() const { return singular_values.size(); }
};

struct SymEig {
    Vector values;   // descending
    Matrix vectors;  // orthonormal columns, same order
};

ReducedSvd reduced_svd(const Matrix& X, RankTolerance tol = {});

// Minimum-norm least squares beta = (X'X)^+ X'Y, computed from the
// reduced SVD as right * diag(1/s) * left' * Y.  For p >= n with full row
// rank this interpolates Y exactly; for p < n full column rank it is OLS.
Vector min_norm_solve(const Matrix& X, const Vector& y, RankTolerance tol = {});
Vector min_norm_solve(const ReducedSvd& svd, const Vector& y);

// (X'X + lambda I)^{-1} X'Y.  lambda = 0 requires full column rank.
Vector ridge_solve(const Matrix& X, const Vector& y, double lambda);
Vector ridge_solve(const ReducedSvd& svd, const Vector& y, double lambda);

// Eigendecomposition of a symmetric matrix, eigenvalues descending.
SymEig sym_eig(const Matrix& A);

void require_finite(const Matrix& X, const char* name);
void require_finite(const Vector& v, const char* name);

}  // namespace noisecast
