#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "noisecast/dgp.hpp"
#include "noisecast/linalg.hpp"

namespace noisecast {

// Idiosyncratic covariance, stored diagonally when possible so that
// population formulas stay O(p K) instead of O(p^2).
class CovU {
  public:
    static CovU diagonal(Vector d);
    static CovU spherical(Eigen::Index p, double variance);
    static CovU dense(Matrix m);

    Eigen::Index dim() const;
    bool is_diagonal() const { return dense_.size() == 0; }

    Vector solve(const Vector& v) const;   // Cov_u^{-1} v
    Matrix solve(const Matrix& M) const;
    double quad(const Vector& v) const;    // v' Cov_u v
    double inv_quad_cross(const Vector& a, const Vector& b) const;  // a' Cov_u^{-1} b
    CovU top_block(Eigen::Index p0) const;  // leading p0 x p0 principal block

  private:
    Vector diag_;
    Matrix dense_;
};

// Population quantities of the induced working model: E X X' =
// Lambda Sigma_f Lambda' + Cov_u, outcome y = rho' f + eps.
struct PopulationModel {
    Matrix Lambda;   // p x K
    Matrix Sigma_f;  // K x K, SPD
    CovU cov_u;
    Vector rho;      // K
    double sigma_eps2 = 1.0;

    void validate() const;
    Eigen::Index p() const { return Lambda.rows(); }
    Eigen::Index K() const { return Lambda.cols(); }

    // Simulation DGP: Sigma_f = I, Cov_u = sigma_u^2 I.
    static PopulationModel from_spec(const FactorModelSpec& spec);
    // Restriction to the first p0 predictors (informative block).
    PopulationModel informative_block(Eigen::Index p0) const;
};

// Working-model coefficient beta = Cov_u^{-1} Lambda (Sigma_f^{-1} +
// Lambda' Cov_u^{-1} Lambda)^{-1} rho, computed through the K x K inner
// inverse only.
Vector induced_beta(const PopulationModel& m);

// Var(e_t) = Var(eps) + (rho - Lambda'beta)' Sigma_f (rho - Lambda'beta)
//          + beta' Cov_u beta.
double induced_resid_var(const PopulationModel& m);

struct RiskPoint {
    double bias2 = 0.0;
    double variance = 0.0;
};

// Conditional squared bias and variance of the pseudo-OLS forecast given
// the design X: bias^2 = beta' A_X (E X X') A_X beta with A_X the
// negative null-space projector of X, variance = sigma_e^2 *
// tr[(X'X)^+ E X X'].  Without an explicit sigma_e2 the working-model
// residual variance is used.
RiskPoint pseudo_ols_risk(const PopulationModel& m, const Matrix& X,
                          double sigma_e2);
RiskPoint pseudo_ols_risk(const PopulationModel& m, const Matrix& X);

// Same decomposition for ridge on the informative block:
// bias^2 = beta_I' A_I Sigma_{X,I} A_I beta_I,
// variance = sigma_e^2 tr[Sigma_{X,I} (G+lambda)^{-1} G (G+lambda)^{-1}],
// G = X_I' X_I.  lambda = 0 is the OLS special case (zero bias) and
// requires full column rank.
RiskPoint ridge_restricted_risk(const PopulationModel& m_I, const Matrix& X_I,
                                double lambda, double sigma_e2);
RiskPoint ridge_restricted_risk(const PopulationModel& m_I, const Matrix& X_I,
                                double lambda);

struct RiskCurve {
    struct Point {
        int p = 0;
        double bias2 = 0.0;
        double variance = 0.0;
        double mse = 0.0;
        std::string regime;  // "p<n", "p=n", "p>n"
    };
    std::vector<Point> points;

    void write_csv(std::ostream& os) const;  // p,bias2,variance,mse,regime
};

// Monte-Carlo average of pseudo_ols_risk over fresh designs at each p on
// the grid, p0 clamped to min(spec.p0, p); mse adds the residual
// variance of the induced working model at that p.
RiskCurve risk_curve(const FactorModelSpec& spec, const std::vector<int>& p_grid,
                     int replications, std::uint64_t seed);

}  // namespace noisecast
