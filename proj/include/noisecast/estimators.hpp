#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "noisecast/linalg.hpp"

namespace noisecast {

enum class Method { PseudoOls, Ols, Ridge, Lasso, PcaRegression };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// A fitted linear forecast rule: prediction = intercept + x . coefficients.
struct LinearPredictor {
    Vector coefficients;
    double intercept = 0.0;
    Method method = Method::PseudoOls;

    struct Metadata {
        int rank = -1;           // numerical rank used (pseudo-OLS / PCA)
        double tuning = 0.0;     // selected lambda where applicable
        bool has_tuning = false;
        int k_factors = -1;      // selected factor count (PCA)
        std::uint64_t seed = 0;
        bool standardized = false;
    } metadata;

    double predict(const Eigen::Ref<const Vector>& x) const {
        return intercept + coefficients.dot(x);
    }
    Vector predict_rows(const Matrix& X) const {
        return (X * coefficients).array() + intercept;
    }

    nlohmann::json to_json() const;
    static LinearPredictor from_json(const nlohmann::json& j);
};

struct CvConfig {
    enum class Split { KFold, EightyTwenty, TimeOrdered };

    int folds = 10;
    Split split_rule = Split::KFold;
    std::vector<double> grid;  // candidate tuning values; empty = auto (Lasso)
    std::uint64_t seed = 0;
};

struct FoldSplit {
    std::vector<int> train;
    std::vector<int> val;
};

// Validation folds for n rows.  KFold partitions a shuffled index set;
// EightyTwenty draws `folds` independent 80/20 splits; TimeOrdered uses
// contiguous validation blocks trained on everything before them.
std::vector<FoldSplit> make_folds(int n, const CvConfig& cv);

// Pseudo-OLS on centered (optionally standardized) data; minimum-norm
// interpolator once p >= n.
LinearPredictor fit_pseudo_ols(const Matrix& X, const Vector& y,
                               RankTolerance tol = {}, bool standardize = false);

// Classical least squares; requires n > p and full column rank.
LinearPredictor fit_ols(const Matrix& X, const Vector& y);

// Ridge with the penalty selected by cross-validation on standardized
// data; ties broken toward the larger penalty.
LinearPredictor fit_ridge_cv(const Matrix& X, const Vector& y,
                             const CvConfig& cv);

// Lasso by coordinate descent at the CV-selected penalty.  An empty grid
// auto-generates lambda_max = ||X_c'Y_c||_inf / n down four decades.
LinearPredictor fit_lasso_cv(const Matrix& X, const Vector& y,
                             const CvConfig& cv);

// Principal-component regression on standardized predictors; when k is
// absent the factor count is selected by the Bai-Ng PC_p1 criterion with
// k_max = min(15, n/2, p/2).  Out-of-sample factors come from regressing
// the new observation on the estimated loadings.
LinearPredictor fit_pca_regression(const Matrix& X, const Vector& y,
                                   std::optional<int> k = {});

// Bai-Ng PC_p1 factor count on an already standardized matrix.
int select_factor_count_pc_p1(const Matrix& X_standardized, int k_max);

std::vector<double> default_ridge_grid(int n);
std::vector<double> lasso_auto_grid(const Matrix& X, const Vector& y);

// Thrown when coordinate descent exhausts its sweep budget; carries the
// last iterate for inspection.
struct LassoDivergence : NumericalError {
    LassoDivergence(const std::string& msg, Vector iterate)
        : NumericalError(msg), last_iterate(std::move(iterate)) {}
    Vector last_iterate;
};

}  // namespace noisecast
