#include "noisecast/theory.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <ostream>

#include "noisecast/csv.hpp"
#include "noisecast/parallel.hpp"
#include "noisecast/rng.hpp"

namespace noisecast {

CovU CovU::diagonal(Vector d) {
    CovU c;
    c.diag_ = std::move(d);
    return c;
}

CovU CovU::spherical(Eigen::Index p, double variance) {
    return diagonal(Vector::Constant(p, variance));
}

CovU CovU::dense(Matrix m) {
    if (m.rows() != m.cols()) throw InvalidInput("CovU: matrix not square");
    CovU c;
    c.dense_ = std::move(m);
    return c;
}

Eigen::Index CovU::dim() const {
    return is_diagonal() ? diag_.size() : dense_.rows();
}

namespace {
Eigen::LDLT<Matrix> factor_dense(const Matrix& m) {
    Eigen::LDLT<Matrix> ldlt(m);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError("Cov_u is not positive definite");
    return ldlt;
}
}  // namespace

Vector CovU::solve(const Vector& v) const {
    if (is_diagonal()) {
        if ((diag_.array() <= 0.0).any())
            throw NumericalError("Cov_u has nonpositive diagonal entries");
        return v.array() / diag_.array();
    }
    return factor_dense(dense_).solve(v);
}

Matrix CovU::solve(const Matrix& M) const {
    if (is_diagonal()) {
        if ((diag_.array() <= 0.0).any())
            throw NumericalError("Cov_u has nonpositive diagonal entries");
        return diag_.array().inverse().matrix().asDiagonal() * M;
    }
    return factor_dense(dense_).solve(M);
}

double CovU::quad(const Vector& v) const {
    if (is_diagonal()) return (v.array().square() * diag_.array()).sum();
    return v.dot(dense_ * v);
}

double CovU::inv_quad_cross(const Vector& a, const Vector& b) const {
    return a.dot(solve(b));
}

CovU CovU::top_block(Eigen::Index p0) const {
    if (p0 < 1 || p0 > dim()) throw InvalidInput("CovU: block out of range");
    if (is_diagonal()) return diagonal(diag_.head(p0));
    return dense(dense_.topLeftCorner(p0, p0));
}

void PopulationModel::validate() const {
    const Eigen::Index pp = Lambda.rows();
    const Eigen::Index kk = Lambda.cols();
    if (pp < 1 || kk < 1) throw InvalidInput("PopulationModel: empty Lambda");
    if (Sigma_f.rows() != kk || Sigma_f.cols() != kk)
        throw InvalidInput("PopulationModel: Sigma_f dimension mismatch");
    if (rho.size() != kk)
        throw InvalidInput("PopulationModel: rho dimension mismatch");
    if (cov_u.dim() != pp)
        throw InvalidInput("PopulationModel: Cov_u dimension mismatch");
    if (!(sigma_eps2 >= 0.0))
        throw InvalidInput("PopulationModel: sigma_eps2 must be >= 0");
}

PopulationModel PopulationModel::from_spec(const FactorModelSpec& spec) {
    spec.validate();
    PopulationModel m;
    m.Lambda = loadings_for(spec);
    m.Sigma_f = Matrix::Identity(spec.K, spec.K);
    m.cov_u = CovU::spherical(spec.p, spec.sigma_u * spec.sigma_u);
    m.rho = spec.rho;
    m.sigma_eps2 = spec.sigma_eps * spec.sigma_eps;
    return m;
}

PopulationModel PopulationModel::informative_block(Eigen::Index p0) const {
    validate();
    if (p0 < 1 || p0 > p())
        throw InvalidInput("informative_block: p0 out of range");
    PopulationModel m;
    m.Lambda = Lambda.topRows(p0);
    m.Sigma_f = Sigma_f;
    m.rho = rho;
    m.sigma_eps2 = sigma_eps2;
    m.cov_u = cov_u.top_block(p0);
    return m;
}

Vector induced_beta(const PopulationModel& m) {
    m.validate();
    Eigen::LLT<Matrix> sf(m.Sigma_f);
    if (sf.info() != Eigen::Success)
        throw NumericalError("induced_beta: Sigma_f is not positive definite");
    const Matrix cinv_lambda = m.cov_u.solve(m.Lambda);  // p x K
    Matrix inner = sf.solve(Matrix::Identity(m.K(), m.K()));
    inner.noalias() += m.Lambda.transpose() * cinv_lambda;
    Eigen::LDLT<Matrix> in(inner);
    if (in.info() != Eigen::Success)
        throw NumericalError("induced_beta: inner K x K system is singular");
    return cinv_lambda * in.solve(m.rho);
}

double induced_resid_var(const PopulationModel& m) {
    const Vector beta = induced_beta(m);
    const Vector d = m.rho - m.Lambda.transpose() * beta;
    return m.sigma_eps2 + d.dot(m.Sigma_f * d) + m.cov_u.quad(beta);
}

namespace {

// v' (Lambda Sigma_f Lambda' + Cov_u) v
double quad_sigma_x(const PopulationModel& m, const Vector& v) {
    const Vector lv = m.Lambda.transpose() * v;
    return lv.dot(m.Sigma_f * lv) + m.cov_u.quad(v);
}

}  // namespace

RiskPoint pseudo_ols_risk(const PopulationModel& m, const Matrix& X,
                          double sigma_e2) {
    m.validate();
    if (X.cols() != m.p())
        throw InvalidInput("pseudo_ols_risk: X has wrong number of columns");
    if (!(sigma_e2 >= 0.0))
        throw InvalidInput("pseudo_ols_risk: sigma_e2 must be >= 0");
    const ReducedSvd svd = reduced_svd(X);
    RiskPoint out;
    // A_X beta = -(I - V V') beta; exactly zero when X has full column rank.
    if (svd.rank() < X.cols()) {
        Vector w = induced_beta(m);
        w.noalias() -= svd.right * (svd.right.transpose() * w);
        out.bias2 = quad_sigma_x(m, w);
    }
    double var_tr = 0.0;
    for (Eigen::Index j = 0; j < svd.rank(); ++j) {
        const double s = svd.singular_values(j);
        var_tr += quad_sigma_x(m, svd.right.col(j)) / (s * s);
    }
    out.variance = sigma_e2 * var_tr;
    return out;
}

RiskPoint pseudo_ols_risk(const PopulationModel& m, const Matrix& X) {
    return pseudo_ols_risk(m, X, induced_resid_var(m));
}

RiskPoint ridge_restricted_risk(const PopulationModel& m_I, const Matrix& X_I,
                                double lambda) {
    return ridge_restricted_risk(m_I, X_I, lambda, induced_resid_var(m_I));
}

RiskPoint ridge_restricted_risk(const PopulationModel& m_I, const Matrix& X_I,
                                double lambda, double sigma_e2) {
    m_I.validate();
    if (X_I.cols() != m_I.p())
        throw InvalidInput("ridge_restricted_risk: X_I has wrong column count");
    if (lambda < 0.0)
        throw InvalidInput("ridge_restricted_risk: lambda must be >= 0");
    const ReducedSvd svd = reduced_svd(X_I);
    if (lambda == 0.0 && svd.rank() < X_I.cols())
        throw NumericalError(
            "ridge_restricted_risk: rank-deficient design at lambda = 0");
    const Vector beta_I = induced_beta(m_I);
    // A_I = (G + lambda)^{-1} G - I shrinks spanned directions by
    // -lambda/(s^2+lambda) and null directions by -1.
    Vector shrink(svd.rank());
    for (Eigen::Index j = 0; j < svd.rank(); ++j) {
        const double s2 = svd.singular_values(j) * svd.singular_values(j);
        shrink(j) = lambda / (s2 + lambda);
    }
    const Vector vb = svd.right.transpose() * beta_I;
    Vector a = svd.right * shrink.cwiseProduct(vb).eval();
    if (svd.rank() < X_I.cols()) a += beta_I - svd.right * vb;
    RiskPoint out;
    out.bias2 = quad_sigma_x(m_I, a);
    double var_tr = 0.0;
    for (Eigen::Index j = 0; j < svd.rank(); ++j) {
        const double s2 = svd.singular_values(j) * svd.singular_values(j);
        const double w = s2 / ((s2 + lambda) * (s2 + lambda));
        var_tr += w * quad_sigma_x(m_I, svd.right.col(j));
    }
    out.variance = sigma_e2 * var_tr;
    return out;
}

void RiskCurve::write_csv(std::ostream& os) const {
    os << "p,bias2,variance,mse,regime\n";
    for (const auto& pt : points)
        os << pt.p << ',' << format_double(pt.bias2) << ','
           << format_double(pt.variance) << ',' << format_double(pt.mse) << ','
           << pt.regime << '\n';
}

RiskCurve risk_curve(const FactorModelSpec& spec, const std::vector<int>& p_grid,
                     int replications, std::uint64_t seed) {
    spec.validate();
    if (p_grid.empty()) throw InvalidInput("risk_curve: empty p grid");
    if (!std::is_sorted(p_grid.begin(), p_grid.end()))
        throw InvalidInput("risk_curve: p grid must be ascending");
    if (p_grid.front() < spec.K)
        throw InvalidInput("risk_curve: grid p below the factor count");
    if (replications < 1)
        throw InvalidInput("risk_curve: replications must be >= 1");

    const long n_p = static_cast<long>(p_grid.size());
    struct Cell {
        double bias2 = 0.0;
        double variance = 0.0;
    };
    std::vector<Cell> cells(static_cast<std::size_t>(n_p) * replications);
    std::vector<double> resid_var(p_grid.size());
    const SeedPath root{seed};

    parallel_for(n_p, [&](long gi) {
        FactorModelSpec sub = spec;
        sub.p = p_grid[static_cast<std::size_t>(gi)];
        sub.p0 = std::min(spec.p0, sub.p);
        const PopulationModel model = PopulationModel::from_spec(sub);
        const double sigma_e2 = induced_resid_var(model);
        resid_var[static_cast<std::size_t>(gi)] = sigma_e2;
        for (int rep = 0; rep < replications; ++rep) {
            FactorModelSpec draw = sub;
            draw.noise_seed =
                root.child("design", static_cast<std::uint64_t>(sub.p))
                    .child(static_cast<std::uint64_t>(rep))
                    .value;
            const SimulatedSample sample = draw_sample(draw);
            cells[static_cast<std::size_t>(gi) * replications + rep] = [&] {
                const RiskPoint rp = pseudo_ols_risk(model, sample.X, sigma_e2);
                return Cell{rp.bias2, rp.variance};
            }();
        }
    });

    RiskCurve out;
    out.points.resize(p_grid.size());
    for (std::size_t gi = 0; gi < p_grid.size(); ++gi) {
        double b = 0.0, v = 0.0;
        for (int rep = 0; rep < replications; ++rep) {
            const Cell& c = cells[gi * replications + rep];
            b += c.bias2;
            v += c.variance;
        }
        b /= replications;
        v /= replications;
        RiskCurve::Point& pt = out.points[gi];
        pt.p = p_grid[gi];
        pt.bias2 = b;
        pt.variance = v;
        pt.mse = b + v + resid_var[gi];
        pt.regime = pt.p < spec.n ? "p<n" : (pt.p == spec.n ? "p=n" : "p>n");
    }
    return out;
}

}  // namespace noisecast
