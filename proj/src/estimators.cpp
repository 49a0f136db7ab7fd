#include "noisecast/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>

#include <nlohmann/json.hpp>

#include "noisecast/rng.hpp"

namespace noisecast {

std::string method_name(Method m) {
    switch (m) {
        case Method::PseudoOls: return "pseudo_ols";
        case Method::Ols: return "ols";
        case Method::Ridge: return "ridge";
        case Method::Lasso: return "lasso";
        case Method::PcaRegression: return "pca";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "pseudo_ols") return Method::PseudoOls;
    if (name == "ols") return Method::Ols;
    if (name == "ridge") return Method::Ridge;
    if (name == "lasso") return Method::Lasso;
    if (name == "pca") return Method::PcaRegression;
    throw InvalidInput("unknown method name: " + name);
}

nlohmann::json LinearPredictor::to_json() const {
    nlohmann::json j;
    j["method"] = method_name(method);
    j["intercept"] = intercept;
    j["coefficients"] = std::vector<double>(
        coefficients.data(), coefficients.data() + coefficients.size());
    nlohmann::json meta;
    meta["rank"] = metadata.rank;
    if (metadata.has_tuning) meta["tuning"] = metadata.tuning;
    if (metadata.k_factors >= 0) meta["k_factors"] = metadata.k_factors;
    meta["seed"] = metadata.seed;
    meta["standardized"] = metadata.standardized;
    j["metadata"] = meta;
    return j;
}

LinearPredictor LinearPredictor::from_json(const nlohmann::json& j) {
    LinearPredictor fit;
    try {
        fit.method = method_from_name(j.at("method").get<std::string>());
        fit.intercept = j.at("intercept").get<double>();
        auto coef = j.at("coefficients").get<std::vector<double>>();
        fit.coefficients = Eigen::Map<const Vector>(
            coef.data(), static_cast<Eigen::Index>(coef.size()));
        const auto& meta = j.at("metadata");
        fit.metadata.rank = meta.value("rank", -1);
        if (meta.contains("tuning")) {
            fit.metadata.tuning = meta["tuning"].get<double>();
            fit.metadata.has_tuning = true;
        }
        fit.metadata.k_factors = meta.value("k_factors", -1);
        fit.metadata.seed = meta.value("seed", std::uint64_t{0});
        fit.metadata.standardized = meta.value("standardized", false);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("LinearPredictor JSON: ") + e.what());
    }
    return fit;
}

namespace {

struct Centering {
    Vector x_mean;
    Vector x_scale;  // all ones unless standardizing
    double y_mean = 0.0;
};

Centering fit_centering(const Matrix& X, const Vector& y, bool standardize) {
    Centering c;
    c.x_mean = X.colwise().mean();
    c.y_mean = y.mean();
    c.x_scale = Vector::Ones(X.cols());
    if (standardize) {
        const double n = static_cast<double>(X.rows());
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const double var =
                (X.col(j).array() - c.x_mean(j)).square().sum() / n;
            const double sd = std::sqrt(var);
            c.x_scale(j) = sd > 1e-12 ? sd : 1.0;
        }
    }
    return c;
}

Matrix centered(const Matrix& X, const Centering& c) {
    Matrix out = X.rowwise() - c.x_mean.transpose();
    out.array().rowwise() /= c.x_scale.transpose().array();
    return out;
}

// Map coefficients fitted on centered/scaled data back to raw inputs.
void restore(LinearPredictor& fit, const Vector& b, const Centering& c) {
    fit.coefficients = b.array() / c.x_scale.array();
    fit.intercept = c.y_mean - fit.coefficients.dot(c.x_mean);
}

void check_shapes(const Matrix& X, const Vector& y, const char* who) {
    if (X.rows() == 0 || X.cols() == 0)
        throw InvalidInput(std::string(who) + ": empty design");
    if (y.size() != X.rows())
        throw InvalidInput(std::string(who) + ": length(Y) != rows(X)");
    require_finite(X, "X");
    require_finite(y, "Y");
}

std::vector<int> shuffled_indices(int n, RandomStream stream) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(
            stream.below(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    return idx;
}

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

constexpr double kLassoTol = 1e-7;
constexpr int kLassoMaxSweeps = 10000;

// Coordinate descent for (1/2n)||y - X b||^2 + lambda ||b||_1 on columns
// with x_j'x_j / n = 1.  Residual r is kept in sync with b.
void lasso_descend(const Matrix& X, Vector& b, Vector& r, double lambda,
                   int& sweeps_used) {
    const double n = static_cast<double>(X.rows());
    const Eigen::Index p = X.cols();
    auto sweep = [&](const std::vector<Eigen::Index>& cols) {
        double max_delta = 0.0;
        for (Eigen::Index j : cols) {
            const double old = b(j);
            const double z = old + X.col(j).dot(r) / n;
            const double next = soft_threshold(z, lambda);
            if (next != old) {
                r += X.col(j) * (old - next);
                b(j) = next;
                max_delta = std::max(max_delta, std::fabs(next - old));
            }
        }
        return max_delta;
    };
    std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), 0);
    for (;;) {
        if (++sweeps_used > kLassoMaxSweeps)
            throw LassoDivergence(
                "lasso failed to converge within " +
                    std::to_string(kLassoMaxSweeps) + " sweeps",
                b);
        const double full_delta = sweep(all);
        if (full_delta < kLassoTol) return;
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j < p; ++j)
            if (b(j) != 0.0) active.push_back(j);
        for (;;) {
            if (++sweeps_used > kLassoMaxSweeps)
                throw LassoDivergence(
                    "lasso failed to converge within " +
                        std::to_string(kLassoMaxSweeps) + " sweeps",
                    b);
            if (sweep(active) < kLassoTol) break;
        }
    }
}

}  // namespace

std::vector<FoldSplit> make_folds(int n, const CvConfig& cv) {
    if (cv.folds < 2) throw InvalidInput("CvConfig: folds must be >= 2");
    if (n < cv.folds && cv.split_rule == CvConfig::Split::KFold)
        throw InvalidInput("make_folds: fewer rows than folds");
    std::vector<FoldSplit> out;
    switch (cv.split_rule) {
        case CvConfig::Split::KFold: {
            const auto idx = shuffled_indices(n, RandomStream(cv.seed, 0));
            out.resize(static_cast<std::size_t>(cv.folds));
            for (int i = 0; i < n; ++i)
                out[static_cast<std::size_t>(i % cv.folds)].val.push_back(idx[static_cast<std::size_t>(i)]);
            for (auto& f : out) {
                std::vector<bool> in_val(static_cast<std::size_t>(n), false);
                for (int v : f.val) in_val[static_cast<std::size_t>(v)] = true;
                for (int i = 0; i < n; ++i)
                    if (!in_val[static_cast<std::size_t>(i)]) f.train.push_back(i);
            }
            break;
        }
        case CvConfig::Split::EightyTwenty: {
            const int n_val = std::max(1, n / 5);
            if (n_val >= n)
                throw InvalidInput("make_folds: 80-20 split needs >= 2 rows");
            out.resize(static_cast<std::size_t>(cv.folds));
            for (int f = 0; f < cv.folds; ++f) {
                const auto idx = shuffled_indices(
                    n, RandomStream(cv.seed, static_cast<std::uint64_t>(f) + 1));
                auto& split = out[static_cast<std::size_t>(f)];
                split.val.assign(idx.begin(), idx.begin() + n_val);
                split.train.assign(idx.begin() + n_val, idx.end());
            }
            break;
        }
        case CvConfig::Split::TimeOrdered: {
            const int block = n / cv.folds;
            if (block < 1) throw InvalidInput("make_folds: fewer rows than folds");
            for (int f = 1; f < cv.folds; ++f) {
                FoldSplit split;
                const int start = f * block;
                const int stop = (f == cv.folds - 1) ? n : (f + 1) * block;
                for (int i = 0; i < start; ++i) split.train.push_back(i);
                for (int i = start; i < stop; ++i) split.val.push_back(i);
                out.push_back(std::move(split));
            }
            break;
        }
    }
    for (const auto& f : out)
        if (f.train.empty() || f.val.empty())
            throw InvalidInput("make_folds: empty effective fold");
    return out;
}

LinearPredictor fit_pseudo_ols(const Matrix& X, const Vector& y,
                               RankTolerance tol, bool standardize) {
    check_shapes(X, y, "fit_pseudo_ols");
    const Centering c = fit_centering(X, y, standardize);
    const Matrix Xc = centered(X, c);
    const Vector yc = y.array() - c.y_mean;
    const ReducedSvd svd = reduced_svd(Xc, tol);
    LinearPredictor fit;
    fit.method = Method::PseudoOls;
    restore(fit, min_norm_solve(svd, yc), c);
    fit.metadata.rank = static_cast<int>(svd.rank());
    fit.metadata.standardized = standardize;
    return fit;
}

LinearPredictor fit_ols(const Matrix& X, const Vector& y) {
    check_shapes(X, y, "fit_ols");
    if (X.rows() <= X.cols())
        throw InvalidInput("fit_ols: requires n > p");
    const Centering c = fit_centering(X, y, false);
    const Matrix Xc = centered(X, c);
    const Vector yc = y.array() - c.y_mean;
    LinearPredictor fit;
    fit.method = Method::Ols;
    restore(fit, ridge_solve(Xc, yc, 0.0), c);
    fit.metadata.rank = static_cast<int>(X.cols());
    return fit;
}

std::vector<double> default_ridge_grid(int n) {
    std::vector<double> grid;
    const double lo = 1e-4 * n, hi = 1e3 * n;
    const int points = 40;
    for (int i = 0; i < points; ++i)
        grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
    return grid;
}

std::vector<double> lasso_auto_grid(const Matrix& X, const Vector& y) {
    const Centering c = fit_centering(X, y, true);
    const Matrix Xc = centered(X, c);
    const Vector yc = y.array() - c.y_mean;
    const double lambda_max =
        (Xc.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(X.rows());
    // Path floor: four decades for tall problems, two when p >= n where
    // smaller penalties enter the interpolation regime and coordinate
    // descent stalls.
    const double ratio = X.rows() > X.cols() ? 1e-4 : 1e-2;
    std::vector<double> grid;
    const int points = 50;
    for (int i = 0; i < points; ++i)
        grid.push_back(lambda_max *
                       std::pow(ratio, static_cast<double>(i) / (points - 1)));
    return grid;  // descending
}

namespace {

// A path solver is bound to one (standardized) training set and is
// queried at descending lambda values, so it can factor once or keep
// warm-start state.  An empty vector marks a path point that cannot be
// scored (for example the lasso past the interpolation threshold); such
// points are excluded from selection.
using PathSolver = std::function<Vector(double lambda)>;
using PathSolverFactory =
    std::function<PathSolver(const Matrix& Xs, const Vector& yc)>;

// Shared CV loop for penalized fits on standardized data.  Grid is
// scanned in descending order; ties in mean held-out MSE go to the
// larger penalty.
LinearPredictor cv_select(const Matrix& X, const Vector& y, const CvConfig& cv,
                          std::vector<double> grid, Method method,
                          const PathSolverFactory& make_solver) {
    check_shapes(X, y, "cross-validated fit");
    if (grid.empty()) throw InvalidInput("CvConfig: empty tuning grid");
    for (double g : grid)
        if (!(g > 0.0)) throw InvalidInput("CvConfig: tuning values must be > 0");
    std::sort(grid.begin(), grid.end(), std::greater<>());
    const auto folds = make_folds(static_cast<int>(X.rows()), cv);
    std::vector<double> score(grid.size(), 0.0);
    for (const auto& fold : folds) {
        Matrix Xt(fold.train.size(), X.cols());
        Vector yt(fold.train.size());
        for (std::size_t i = 0; i < fold.train.size(); ++i) {
            Xt.row(static_cast<Eigen::Index>(i)) = X.row(fold.train[i]);
            yt(static_cast<Eigen::Index>(i)) = y(fold.train[i]);
        }
        const Centering c = fit_centering(Xt, yt, true);
        const Matrix Xs = centered(Xt, c);
        const Vector yc = yt.array() - c.y_mean;
        PathSolver solver = make_solver(Xs, yc);
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const Vector b = solver(grid[gi]);
            if (b.size() == 0) {
                score[gi] = std::numeric_limits<double>::infinity();
                continue;
            }
            double sse = 0.0;
            for (int v : fold.val) {
                const Vector xs =
                    (X.row(v).transpose() - c.x_mean).array() / c.x_scale.array();
                const double pred = c.y_mean + b.dot(xs);
                const double err = y(v) - pred;
                sse += err * err;
            }
            score[gi] += sse / static_cast<double>(fold.val.size());
        }
    }
    for (auto& s : score) s /= static_cast<double>(folds.size());
    std::size_t best = 0;  // grid descending: first strict minimum = largest tie
    for (std::size_t gi = 1; gi < grid.size(); ++gi)
        if (score[gi] < score[best]) best = gi;
    if (!std::isfinite(score[best]))
        throw NumericalError("cross-validation scored no usable grid point");

    const Centering c = fit_centering(X, y, true);
    const Matrix Xs = centered(X, c);
    const Vector yc = y.array() - c.y_mean;
    const Vector b = make_solver(Xs, yc)(grid[best]);
    if (b.size() == 0)
        throw NumericalError("refit at the selected penalty did not converge");
    LinearPredictor fit;
    fit.method = method;
    restore(fit, b, c);
    fit.metadata.tuning = grid[best];
    fit.metadata.has_tuning = true;
    fit.metadata.seed = cv.seed;
    fit.metadata.standardized = true;
    return fit;
}

}  // namespace

LinearPredictor fit_ridge_cv(const Matrix& X, const Vector& y,
                             const CvConfig& cv) {
    std::vector<double> grid =
        cv.grid.empty() ? default_ridge_grid(static_cast<int>(X.rows())) : cv.grid;
    return cv_select(X, y, cv, std::move(grid), Method::Ridge,
                     [](const Matrix& Xs, const Vector& yc) -> PathSolver {
                         auto svd = std::make_shared<ReducedSvd>(reduced_svd(Xs));
                         return [svd, yc](double lambda) {
                             return ridge_solve(*svd, yc, lambda);
                         };
                     });
}

LinearPredictor fit_lasso_cv(const Matrix& X, const Vector& y,
                             const CvConfig& cv) {
    std::vector<double> grid = cv.grid.empty() ? lasso_auto_grid(X, y) : cv.grid;
    return cv_select(
        X, y, cv, std::move(grid), Method::Lasso,
        [](const Matrix& Xs, const Vector& yc) -> PathSolver {
            auto b = std::make_shared<Vector>(Vector::Zero(Xs.cols()));
            auto r = std::make_shared<Vector>(yc);
            auto dead = std::make_shared<bool>(false);
            // Path points past the interpolation threshold (active count
            // at the sample size) or past the sweep budget cannot be
            // scored; once one appears the remaining smaller penalties
            // are skipped as well.
            return [&Xs, b, r, dead](double lambda) -> Vector {
                if (*dead) return Vector();
                const auto n = Xs.rows();
                Eigen::Index active = 0;
                for (Eigen::Index j = 0; j < b->size(); ++j)
                    active += (*b)(j) != 0.0;
                if (active >= static_cast<Eigen::Index>(0.95 * n)) {
                    *dead = true;
                    return Vector();
                }
                int sweeps = 0;
                try {
                    lasso_descend(Xs, *b, *r, lambda, sweeps);
                } catch (const LassoDivergence&) {
                    *dead = true;
                    return Vector();
                }
                return *b;
            };
        });
}

int select_factor_count_pc_p1(const Matrix& Xs, int k_max) {
    const double n = static_cast<double>(Xs.rows());
    const double p = static_cast<double>(Xs.cols());
    const Eigen::Index m = std::min(Xs.rows(), Xs.cols());
    if (k_max < 1 || k_max > m)
        throw InvalidInput("select_factor_count_pc_p1: bad k_max");
    Eigen::BDCSVD<Matrix> svd(Xs);
    const Vector& s = svd.singularValues();
    // V(k) = mean squared residual of the k-factor approximation
    //      = sum of squared singular values beyond the first k, over n*p.
    std::vector<double> tail(static_cast<std::size_t>(m) + 1, 0.0);
    for (Eigen::Index j = m - 1; j >= 0; --j)
        tail[static_cast<std::size_t>(j)] =
            tail[static_cast<std::size_t>(j) + 1] + s(j) * s(j);
    auto vk = [&](int kk) { return tail[static_cast<std::size_t>(kk)] / (n * p); };
    const double sigma2 = vk(k_max);
    const double penalty_unit =
        ((n + p) / (n * p)) * std::log(n * p / (n + p));
    int best_k = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= k_max; ++k) {
        const double crit = vk(k) + k * sigma2 * penalty_unit;
        if (crit < best) {
            best = crit;
            best_k = k;
        }
    }
    return best_k;
}

LinearPredictor fit_pca_regression(const Matrix& X, const Vector& y,
                                   std::optional<int> k) {
    check_shapes(X, y, "fit_pca_regression");
    const Eigen::Index m = std::min(X.rows(), X.cols());
    if (k && (*k < 1 || *k > m))
        throw InvalidInput("fit_pca_regression: k must lie in [1, min(n, p)]");
    const Centering c = fit_centering(X, y, true);
    const Matrix Xs = centered(X, c);
    const Vector yc = y.array() - c.y_mean;
    int k_use;
    if (k) {
        k_use = *k;
    } else {
        const int k_max = std::max(
            1, static_cast<int>(std::min<Eigen::Index>(
                   15, std::min(X.rows() / 2, X.cols() / 2))));
        k_use = select_factor_count_pc_p1(Xs, k_max);
    }
    const ReducedSvd svd = reduced_svd(Xs);
    const Eigen::Index k_eff = std::min<Eigen::Index>(k_use, svd.rank());
    // In-sample factors U_k S_k; regression of y on them reduces to
    // gamma_j = u_j'y / s_j.  The OOS rule (least squares of x_new on the
    // loadings V_k) collapses to x-space coefficients V_k gamma.
    Vector gamma(k_eff);
    for (Eigen::Index j = 0; j < k_eff; ++j)
        gamma(j) = svd.left.col(j).dot(yc) / svd.singular_values(j);
    LinearPredictor fit;
    fit.method = Method::PcaRegression;
    restore(fit, Vector(svd.right.leftCols(k_eff) * gamma), c);
    fit.metadata.rank = static_cast<int>(svd.rank());
    fit.metadata.k_factors = k_use;
    fit.metadata.standardized = true;
    return fit;
}

}  // namespace noisecast
