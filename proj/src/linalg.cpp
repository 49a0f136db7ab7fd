#include "noisecast/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace noisecast {

void require_finite(const Matrix& X, const char* name) {
    if (!X.allFinite())
        throw InvalidInput(std::string(name) + " contains non-finite entries");
}

void require_finite(const Vector& v, const char* name) {
    if (!v.allFinite())
        throw InvalidInput(std::string(name) + " contains non-finite entries");
}

namespace {

ReducedSvd truncate(const Matrix& U, const Vector& s, const Matrix& V,
                    double cutoff) {
    Eigen::Index r = 0;
    const double smax = s.size() > 0 ? s(0) : 0.0;
    const double threshold = cutoff * smax;
    for (Eigen::Index j = 0; j < s.size(); ++j)
        if (s(j) > threshold && s(j) > 0.0) ++r;
    ReducedSvd out;
    out.left = U.leftCols(r);
    out.singular_values = s.head(r);
    out.right = V.leftCols(r);
    return out;
}

// For strongly rectangular X the thin SVD is cheaper through the Gram
// matrix of the short side: X X' = W D W' gives s = sqrt(D) and
// V = X' W diag(1/s).  Falls back to BDCSVD when any kept singular value
// sits too close to the cutoff for the squared spectrum to resolve it.
ReducedSvd svd_via_gram(const Matrix& X, double cutoff) {
    const bool wide = X.cols() >= X.rows();
    const Matrix gram = wide ? Matrix(X * X.transpose())
                             : Matrix(X.transpose() * X);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition failed in reduced_svd");
    const Eigen::Index m = gram.rows();
    Vector s(m);
    Matrix W(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double ev = eig.eigenvalues()(m - 1 - j);
        s(j) = ev > 0.0 ? std::sqrt(ev) : 0.0;
        W.col(j) = eig.eigenvectors().col(m - 1 - j);
    }
    const double smax = s(0);
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < m; ++j)
        if (s(j) > cutoff * smax && s(j) > 0.0) ++r;
    // Squaring loses half the exponent range: near the cutoff the Gram
    // route cannot certify the rank, so defer to the direct SVD.
    const double safe = std::max(cutoff * 1e4, 1e-7);
    for (Eigen::Index j = 0; j < r; ++j)
        if (s(j) <= safe * smax) {
            Eigen::BDCSVD<Matrix> svd(X,
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
            if (svd.info() != Eigen::Success)
                throw NumericalError("SVD failed to converge");
            return truncate(svd.matrixU(), svd.singularValues(), svd.matrixV(),
                            cutoff);
        }
    ReducedSvd out;
    out.singular_values = s.head(r);
    if (wide) {
        out.left = W.leftCols(r);
        out.right.noalias() = X.transpose() * out.left;
    } else {
        out.right = W.leftCols(r);
        out.left.noalias() = X * out.right;
    }
    Matrix& scaled = wide ? out.right : out.left;
    for (Eigen::Index j = 0; j < r; ++j) scaled.col(j) /= s(j);
    return out;
}

}  // namespace

ReducedSvd reduced_svd(const Matrix& X, RankTolerance tol) {
    if (X.size() == 0) throw InvalidInput("reduced_svd: empty matrix");
    if (!(tol.relative_cutoff >= 0.0 && tol.relative_cutoff < 1.0))
        throw InvalidInput("reduced_svd: relative_cutoff must lie in [0, 1)");
    require_finite(X, "X");
    const Eigen::Index lo = std::min(X.rows(), X.cols());
    const Eigen::Index hi = std::max(X.rows(), X.cols());
    if (hi >= 3 * lo && lo > 8) return svd_via_gram(X, tol.relative_cutoff);
    Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw NumericalError("SVD failed to converge");
    return truncate(svd.matrixU(), svd.singularValues(), svd.matrixV(),
                    tol.relative_cutoff);
}

Vector min_norm_solve(const ReducedSvd& svd, const Vector& y) {
    if (y.size() != svd.left.rows())
        throw InvalidInput("min_norm_solve: length(Y) != rows(X)");
    if (svd.rank() == 0) return Vector::Zero(svd.right.rows());
    Vector z = svd.left.transpose() * y;
    z.array() /= svd.singular_values.array();
    return svd.right * z;
}

Vector min_norm_solve(const Matrix& X, const Vector& y, RankTolerance tol) {
    if (y.size() != X.rows())
        throw InvalidInput("min_norm_solve: length(Y) != rows(X)");
    require_finite(y, "Y");
    return min_norm_solve(reduced_svd(X, tol), y);
}

Vector ridge_solve(const ReducedSvd& svd, const Vector& y, double lambda) {
    if (y.size() != svd.left.rows())
        throw InvalidInput("ridge_solve: length(Y) != rows(X)");
    if (lambda < 0.0) throw InvalidInput("ridge_solve: lambda must be >= 0");
    // X' Y lies in the span of the right singular vectors, so
    // (X'X + lambda I)^{-1} X'Y = V diag(s / (s^2 + lambda)) U'Y.
    Vector z = svd.left.transpose() * y;
    for (Eigen::Index j = 0; j < svd.rank(); ++j) {
        const double s = svd.singular_values(j);
        z(j) *= s / (s * s + lambda);
    }
    return svd.right * z;
}

Vector ridge_solve(const Matrix& X, const Vector& y, double lambda) {
    if (y.size() != X.rows())
        throw InvalidInput("ridge_solve: length(Y) != rows(X)");
    if (lambda < 0.0) throw InvalidInput("ridge_solve: lambda must be >= 0");
    require_finite(X, "X");
    require_finite(y, "Y");
    const ReducedSvd svd = reduced_svd(X);
    if (lambda == 0.0 && svd.rank() < X.cols())
        throw NumericalError(
            "ridge_solve: singular system at lambda = 0 (rank " +
            std::to_string(svd.rank()) + " < " + std::to_string(X.cols()) + ")");
    return ridge_solve(svd, y, lambda);
}

SymEig sym_eig(const Matrix& A) {
    if (A.rows() != A.cols()) throw InvalidInput("sym_eig: matrix not square");
    require_finite(A, "A");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InvalidInput("sym_eig: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(
        Matrix(0.5 * (A + A.transpose())));
    if (eig.info() != Eigen::Success)
        throw NumericalError("sym_eig: eigendecomposition failed");
    SymEig out;
    out.values = eig.eigenvalues().reverse();
    out.vectors = eig.eigenvectors().rowwise().reverse();
    return out;
}

}  // namespace noisecast
