#include <doctest.h>

#include <cmath>
#include <limits>

#include "noisecast/linalg.hpp"
#include "test_support.hpp"

using namespace noisecast;
using test::random_matrix;
using test::random_vector;

namespace {

double reconstruction_error(const Matrix& X, const ReducedSvd& svd) {
    const Matrix back =
        svd.left * svd.singular_values.asDiagonal() * svd.right.transpose();
    return (X - back).norm();
}

void check_orthonormal(const Matrix& Q, double tol = 1e-8) {
    const Matrix gram = Q.transpose() * Q;
    CHECK((gram - Matrix::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff() <
          tol);
}

}  // namespace

TEST_CASE("reduced_svd: identity matrix") {
    const ReducedSvd svd = reduced_svd(Matrix::Identity(3, 3), {1e-12});
    CHECK(svd.rank() == 3);
    for (int j = 0; j < 3; ++j)
        CHECK(svd.singular_values(j) == doctest::Approx(1.0));
}

TEST_CASE("reduced_svd: analytic rank-1 diagonal") {
    Matrix X = Matrix::Zero(2, 2);
    X(0, 0) = 2.0;
    const ReducedSvd svd = reduced_svd(X, {1e-12});
    CHECK(svd.rank() == 1);
    CHECK(svd.singular_values(0) == doctest::Approx(2.0));
}

TEST_CASE("reduced_svd: random 4x9 reconstructs the input") {
    const Matrix X = random_matrix(4, 9, 7);
    const ReducedSvd svd = reduced_svd(X);
    CHECK(svd.rank() == 4);
    CHECK(reconstruction_error(X, svd) < 1e-10);
    check_orthonormal(svd.left);
    check_orthonormal(svd.right);
    for (int j = 1; j < svd.rank(); ++j)
        CHECK(svd.singular_values(j) <= svd.singular_values(j - 1));
}

TEST_CASE("reduced_svd: gram fast path matches on strongly wide and tall") {
    for (auto [r, c] : {std::pair{10, 80}, std::pair{80, 10}}) {
        const Matrix X = random_matrix(r, c, 21);
        const ReducedSvd svd = reduced_svd(X);
        CHECK(svd.rank() == std::min(r, c));
        CHECK(reconstruction_error(X, svd) < 1e-8 * X.norm());
        check_orthonormal(svd.left, 1e-10);
        check_orthonormal(svd.right, 1e-10);
    }
}

TEST_CASE("reduced_svd: rank-deficient wide matrix (duplicated columns)") {
    Matrix base = random_matrix(6, 4, 3);
    Matrix X(6, 40);
    for (int j = 0; j < 40; ++j) X.col(j) = base.col(j % 4);
    const ReducedSvd svd = reduced_svd(X);
    CHECK(svd.rank() == 4);
    CHECK(reconstruction_error(X, svd) < 1e-8 * X.norm());
}

TEST_CASE("reduced_svd: rejects non-finite input and bad tolerance") {
    Matrix X = Matrix::Ones(2, 2);
    X(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(reduced_svd(X), InvalidInput);
    CHECK_THROWS_AS(reduced_svd(Matrix::Ones(2, 2), RankTolerance{1.5}),
                    InvalidInput);
}

TEST_CASE("min_norm_solve: identity design returns Y") {
    Vector y(2);
    y << 3.0, -1.0;
    const Vector beta = min_norm_solve(Matrix::Identity(2, 2), y);
    CHECK(beta(0) == doctest::Approx(3.0));
    CHECK(beta(1) == doctest::Approx(-1.0));
}

TEST_CASE("min_norm_solve: interpolates when p >= n") {
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const Matrix X = random_matrix(5, 9, seed);
        const Vector y = random_vector(5, seed + 100);
        const Vector beta = min_norm_solve(X, y);
        CHECK((X * beta - y).norm() < 1e-8 * y.norm());
    }
}

TEST_CASE("min_norm_solve: matches the normal equations for tall full rank") {
    const Matrix X = random_matrix(6, 3, 42);
    const Vector y = random_vector(6, 43);
    const Vector beta = min_norm_solve(X, y);
    const Vector oracle =
        (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((beta - oracle).norm() < 1e-8);
}

TEST_CASE("min_norm_solve: dimension mismatch") {
    CHECK_THROWS_AS(min_norm_solve(Matrix::Ones(3, 2), Vector::Ones(4)),
                    InvalidInput);
}

TEST_CASE("min_norm_solve: minimal Euclidean norm among null-space shifts") {
    const Matrix X = random_matrix(4, 10, 5);
    const Vector y = random_vector(4, 6);
    const Vector beta = min_norm_solve(X, y);
    const ReducedSvd svd = reduced_svd(X);
    // Null-space basis from the complement of the right singular vectors.
    Eigen::FullPivHouseholderQR<Matrix> qr(svd.right);
    const Matrix Q = qr.matrixQ();
    for (int j = static_cast<int>(svd.rank()); j < 10; ++j) {
        const Vector z = Q.col(j);
        CHECK((X * z).norm() < 1e-8);
        CHECK((beta + z).norm() >= beta.norm() - 1e-12);
        CHECK(std::fabs(beta.dot(z)) < 1e-8);
    }
}

TEST_CASE("pseudo-inverse identities on random instances") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const int n = 3 + static_cast<int>(seed) * 2;
        const int p = 20 - static_cast<int>(seed);
        const Matrix X = random_matrix(n, p, seed * 17);
        const ReducedSvd svd = reduced_svd(X);
        Matrix pinv_gram = Matrix::Zero(p, p);  // (X'X)^+
        for (int j = 0; j < svd.rank(); ++j)
            pinv_gram += svd.right.col(j) * svd.right.col(j).transpose() /
                         (svd.singular_values(j) * svd.singular_values(j));
        const Matrix gram = X.transpose() * X;
        CHECK((X * pinv_gram * gram - X).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((pinv_gram * gram * pinv_gram - pinv_gram).cwiseAbs().maxCoeff() <
              1e-8);
    }
}

TEST_CASE("min_norm_solve agrees with the ridge limit") {
    const Matrix X = random_matrix(5, 12, 77);
    const Vector y = random_vector(5, 78);
    const Vector beta = min_norm_solve(X, y);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
        const double gap = (beta - ridge_solve(X, y, lambda)).norm();
        CHECK(gap <= prev + 1e-12);
        prev = gap;
    }
    CHECK(prev < 1e-6);
}

TEST_CASE("ridge_solve: identity design with lambda = 1") {
    Vector y(2);
    y << 2.0, 2.0;
    const Vector beta = ridge_solve(Matrix::Identity(2, 2), y, 1.0);
    CHECK(beta(0) == doctest::Approx(1.0));
    CHECK(beta(1) == doctest::Approx(1.0));
}

TEST_CASE("ridge_solve: coefficient norm shrinks monotonically in lambda") {
    const Matrix X = random_matrix(8, 3, 9);
    const Vector y = random_vector(8, 10);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.1, 1.0, 10.0, 100.0, 1000.0}) {
        const double norm = ridge_solve(X, y, lambda).norm();
        CHECK(norm < prev);
        prev = norm;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("ridge_solve: matches explicit small-matrix inverse") {
    const Matrix X = random_matrix(8, 3, 31);
    const Vector y = random_vector(8, 32);
    const Matrix G = X.transpose() * X + 0.5 * Matrix::Identity(3, 3);
    const Vector oracle = G.inverse() * X.transpose() * y;
    CHECK((ridge_solve(X, y, 0.5) - oracle).norm() < 1e-10);
}

TEST_CASE("ridge_solve: lambda = 0 demands full column rank") {
    Matrix X(4, 2);
    X.col(0) = random_vector(4, 1);
    X.col(1) = 2.0 * X.col(0);
    CHECK_THROWS_AS(ridge_solve(X, Vector::Ones(4), 0.0), NumericalError);
    CHECK_THROWS_AS(ridge_solve(X, Vector::Ones(4), -1.0), InvalidInput);
    const Matrix Xf = random_matrix(5, 2, 2);
    const Vector y = random_vector(5, 3);
    const Vector ols = ridge_solve(Xf, y, 0.0);
    const Vector oracle =
        (Xf.transpose() * Xf).ldlt().solve(Xf.transpose() * y);
    CHECK((ols - oracle).norm() < 1e-10);
}

TEST_CASE("sym_eig: diagonal and identity cases") {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 0) = 3.0;
    A(1, 1) = 1.0;
    const SymEig eig = sym_eig(A);
    CHECK(eig.values(0) == doctest::Approx(3.0));
    CHECK(eig.values(1) == doctest::Approx(1.0));
    CHECK(std::fabs(eig.vectors(0, 0)) == doctest::Approx(1.0));

    const SymEig id = sym_eig(Matrix::Identity(4, 4));
    for (int j = 0; j < 4; ++j) CHECK(id.values(j) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig: random symmetric matrix reconstructs") {
    Matrix B = random_matrix(5, 5, 55);
    const Matrix A = 0.5 * (B + B.transpose());
    const SymEig eig = sym_eig(A);
    const Matrix back =
        eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    CHECK((A - back).norm() < 1e-8);
    for (int j = 0; j < 5; ++j)
        CHECK((A * eig.vectors.col(j) - eig.values(j) * eig.vectors.col(j))
                  .norm() < 1e-8 * std::max(1.0, std::fabs(eig.values(j))));
}

TEST_CASE("sym_eig: rejects asymmetric input") {
    Matrix A = Matrix::Zero(2, 2);
    A(0, 1) = 1.0;
    CHECK_THROWS_AS(sym_eig(A), InvalidInput);
}

TEST_CASE("determinism: identical inputs give bitwise-identical outputs") {
    const Matrix X = random_matrix(7, 13, 99);
    const Vector y = random_vector(7, 98);
    const Vector a = min_norm_solve(X, y);
    const Vector b = min_norm_solve(X, y);
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) CHECK(a(i) == b(i));
    const ReducedSvd s1 = reduced_svd(X);
    const ReducedSvd s2 = reduced_svd(X);
    CHECK((s1.singular_values.array() == s2.singular_values.array()).all());
    CHECK((s1.right.array() == s2.right.array()).all());
}
